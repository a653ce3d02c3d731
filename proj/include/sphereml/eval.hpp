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

#ifndef SPHEREML_EVAL_HPP_
#define SPHEREML_EVAL_HPP_

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "sphereml/manifold.hpp"

// Ranked-retrieval evaluation: CMC curve and mAP over a query/gallery
// split with the same-identity-same-camera junk exclusion rule.

namespace sphereml {

struct GalleryEntry {
  EmbeddingVector embedding;
  int identity = 0;
  int camera = 0;

  GalleryEntry(EmbeddingVector e, int id, int cam)
      : embedding(std::move(e)), identity(id), camera(cam) {}
};

enum class Metric { kCosine, kEuclidean };

/// Gallery indices sorted best-first: decreasing cosine similarity or
/// increasing chord distance (identical orderings on unit-norm inputs).
/// Ties break toward the lower gallery index.
std::vector<int> rank_gallery(const GalleryEntry& query,
                              const std::vector<GalleryEntry>& gallery,
                              Metric metric);

struct EvalProtocol {
  Metric metric = Metric::kCosine;
  /// Exclude gallery entries sharing both identity and camera with the
  /// query before ranking.
  bool camera_exclusion = true;
};

struct RetrievalReport {
  /// cmc[k-1] = fraction of valid queries whose first correct match
  /// occurs at rank <= k; indexed up to the gallery size.
  std::vector<double> cmc;
  double mean_ap = 0.0;
  std::vector<double> per_query_ap;  // valid queries only, in query order
  int num_valid_queries = 0;

  /// CMC at rank k (clamped to the curve length).
  double rank_k(int k) const;
  /// Flat key-value block: rank1=, rank5=, rank10=, mAP=, valid_queries=.
  std::string to_text() const;
  /// Per-rank CMC CSV ("rank,cmc").
  std::string cmc_csv() const;
};

/// Queries with no valid same-identity gallery entry after exclusion are
/// skipped and do not count toward num_valid_queries. Throws
/// NoValidQueries when every query is skipped, EmptyGallery on an empty
/// gallery.
RetrievalReport evaluate(const std::vector<GalleryEntry>& queries,
                         const std::vector<GalleryEntry>& gallery,
                         const EvalProtocol& protocol);

/// Mean cosine over intra-class pairs and over inter-class pairs.
/// Requires >= 2 classes and >= 2 samples in every class; rows of
/// `embeddings` must be unit-norm.
std::pair<double, double> angular_separation_stats(
    const Eigen::MatrixXd& embeddings, const std::vector<int>& labels);

}  // namespace sphereml

#endif  // SPHEREML_EVAL_HPP_
