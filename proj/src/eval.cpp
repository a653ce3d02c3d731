/*
 * Copyright 2026 The sphereml Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sphereml/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

namespace sphereml {

namespace {

// Smaller score ranks earlier; gallery index breaks ties.
std::vector<int> sort_by_score(const std::vector<double>& score) {
  std::vector<int> order(score.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return a < b;
  });
  return order;
}

}  // namespace

std::vector<int> rank_gallery(const GalleryEntry& query,
                              const std::vector<GalleryEntry>& gallery,
                              Metric metric) {
  if (gallery.empty()) throw EmptyGallery("rank_gallery: empty gallery");
  std::vector<double> score(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    if (gallery[i].embedding.dim() != query.embedding.dim()) {
      throw DimensionMismatch("rank_gallery: embedding dimension mismatch");
    }
    score[i] = metric == Metric::kCosine
                   ? -cosine_similarity(query.embedding, gallery[i].embedding)
                   : sphere_euclidean(query.embedding, gallery[i].embedding);
  }
  return sort_by_score(score);
}

RetrievalReport evaluate(const std::vector<GalleryEntry>& queries,
                         const std::vector<GalleryEntry>& gallery,
                         const EvalProtocol& protocol) {
  if (gallery.empty()) throw EmptyGallery("evaluate: empty gallery");

  RetrievalReport report;
  report.cmc.assign(gallery.size(), 0.0);
  double ap_sum = 0.0;

  for (const GalleryEntry& query : queries) {
    // drop junk entries: same identity seen by the same camera
    std::vector<const GalleryEntry*> valid;
    valid.reserve(gallery.size());
    for (const GalleryEntry& g : gallery) {
      if (protocol.camera_exclusion && g.identity == query.identity &&
          g.camera == query.camera) {
        continue;
      }
      valid.push_back(&g);
    }
    int num_relevant = 0;
    for (const GalleryEntry* g : valid) {
      if (g->identity == query.identity) ++num_relevant;
    }
    if (num_relevant == 0) continue;  // skipped, not counted as valid

    std::vector<double> score(valid.size());
    for (std::size_t i = 0; i < valid.size(); ++i) {
      score[i] =
          protocol.metric == Metric::kCosine
              ? -cosine_similarity(query.embedding, valid[i]->embedding)
              : sphere_euclidean(query.embedding, valid[i]->embedding);
    }
    const std::vector<int> order = sort_by_score(score);

    int first_correct_rank = 0;  // 1-based
    int correct_so_far = 0;
    double ap = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (valid[order[r]]->identity == query.identity) {
        ++correct_so_far;
        ap += static_cast<double>(correct_so_far) / static_cast<double>(r + 1);
        if (first_correct_rank == 0) {
          first_correct_rank = static_cast<int>(r) + 1;
        }
      }
    }
    ap /= static_cast<double>(num_relevant);

    ++report.num_valid_queries;
    report.per_query_ap.push_back(ap);
    ap_sum += ap;
    for (std::size_t k = first_correct_rank - 1; k < report.cmc.size(); ++k) {
      report.cmc[k] += 1.0;
    }
  }

  if (report.num_valid_queries == 0) {
    throw NoValidQueries("evaluate: no query has a valid gallery match");
  }
  for (double& c : report.cmc) c /= report.num_valid_queries;
  report.mean_ap = ap_sum / report.num_valid_queries;
  return report;
}

double RetrievalReport::rank_k(int k) const {
  if (cmc.empty()) return 0.0;
  const int idx = std::clamp<int>(k, 1, static_cast<int>(cmc.size()));
  return cmc[idx - 1];
}

std::string RetrievalReport::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  out << "rank1=" << rank_k(1) << "\n";
  out << "rank5=" << rank_k(5) << "\n";
  out << "rank10=" << rank_k(10) << "\n";
  out << "mAP=" << mean_ap << "\n";
  out << "valid_queries=" << num_valid_queries << "\n";
  return out.str();
}

std::string RetrievalReport::cmc_csv() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  out << "rank,cmc\n";
  for (std::size_t k = 0; k < cmc.size(); ++k) {
    out << (k + 1) << "," << cmc[k] << "\n";
  }
  return out.str();
}

std::pair<double, double> angular_separation_stats(
    const Eigen::MatrixXd& embeddings, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows()) {
    throw DimensionMismatch("angular_separation_stats: label count mismatch");
  }
  std::map<int, int> class_counts;
  for (int y : labels) ++class_counts[y];
  if (class_counts.size() < 2) {
    throw InsufficientData("angular_separation_stats requires >= 2 classes");
  }
  for (const auto& [y, count] : class_counts) {
    if (count < 2) {
      throw InsufficientData(
          "angular_separation_stats requires >= 2 samples per class");
    }
  }

  double intra_sum = 0.0, inter_sum = 0.0;
  long intra_n = 0, inter_n = 0;
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < embeddings.rows(); ++j) {
      const double c = cosine_similarity(embeddings.row(i).transpose(),
                                         embeddings.row(j).transpose());
      if (labels[i] == labels[j]) {
        intra_sum += c;
        ++intra_n;
      } else {
        inter_sum += c;
        ++inter_n;
      }
    }
  }
  return {intra_sum / intra_n, inter_sum / inter_n};
}

}  // namespace sphereml
