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

#include "sphereml/train.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "sphereml/manifold.hpp"

namespace sphereml {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed * 6364136223846793005ULL + stream * 1442695040888963407ULL + 1ULL;
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic data

void SyntheticDatasetSpec::validate() const {
  if (num_identities < 2) {
    throw InvalidSpec("synthetic spec needs >= 2 identities");
  }
  if (static_cast<int>(train_counts.size()) != num_identities) {
    throw InvalidSpec("synthetic spec train_counts must list every identity");
  }
  for (int c : train_counts) {
    if (c < 1) throw InvalidSpec("synthetic train counts must be >= 1");
  }
  if (dim < 1) throw InvalidSpec("synthetic dim must be >= 1");
  if (!(noise_scale >= 0.0)) throw InvalidSpec("noise scale must be >= 0");
  if (!(center_scale > 0.0)) throw InvalidSpec("center scale must be > 0");
  if (num_cameras < 1) throw InvalidSpec("need >= 1 camera");
  if (queries_per_identity < 1 || gallery_per_identity < 1) {
    throw InvalidSpec("need >= 1 query and gallery sample per identity");
  }
}

std::vector<int> skewed_counts(int num_identities, int min_count,
                               int max_count) {
  if (num_identities < 1 || min_count < 1 || max_count < min_count) {
    throw InvalidSpec("bad skewed_counts arguments");
  }
  std::vector<int> counts(num_identities);
  for (int i = 0; i < num_identities; ++i) {
    const double t = num_identities == 1
                         ? 0.0
                         : static_cast<double>(i) / (num_identities - 1);
    counts[i] = static_cast<int>(std::lround(
        min_count * std::pow(static_cast<double>(max_count) / min_count, t)));
  }
  return counts;
}

FeatureDataset generate_synthetic(const SyntheticDatasetSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  FeatureDataset data;
  const int per_id_extra = spec.queries_per_identity + spec.gallery_per_identity;
  int total = per_id_extra * spec.num_identities;
  for (int c : spec.train_counts) total += c;
  data.features.resize(total, spec.dim);

  int row = 0;
  for (int id = 0; id < spec.num_identities; ++id) {
    Eigen::VectorXd dir(spec.dim);
    for (int j = 0; j < spec.dim; ++j) dir(j) = gauss(rng);
    Eigen::VectorXd center = spec.center_scale * l2_normalize(dir);

    const int n_train = spec.train_counts[id];
    const int n_total = n_train + per_id_extra;
    for (int k = 0; k < n_total; ++k) {
      Eigen::VectorXd sample = center;
      for (int j = 0; j < spec.dim; ++j) {
        sample(j) += spec.noise_scale * gauss(rng);
      }
      data.features.row(row) = sample.transpose();
      std::ostringstream sid;
      sid << "id" << id << "_" << k;
      data.sample_ids.push_back(sid.str());
      data.identities.push_back(id);
      data.cameras.push_back(k % spec.num_cameras);
      Split split = Split::kTrain;
      if (k >= n_train + spec.queries_per_identity) {
        split = Split::kGallery;
      } else if (k >= n_train) {
        split = Split::kQuery;
      }
      data.splits.push_back(split);
      ++row;
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Config / log plumbing

void ExperimentConfig::validate() const {
  if (total_epochs < 1) throw InvalidConfig("total_epochs must be >= 1");
  if (schedule.total_epochs != total_epochs) {
    throw InvalidConfig("schedule total_epochs must match total_epochs");
  }
  schedule.validate();
  if (loss_kind == LossKind::kSphere && !(scale > 0.0)) {
    throw InvalidConfig("sphere scale must be > 0");
  }
  if (balanced) {
    if (sampler.num_identities_per_batch < 1 ||
        sampler.instances_per_identity < 1) {
      throw InvalidConfig("sampler P and K must be >= 1");
    }
  } else if (imbalanced_batch_size < 1) {
    throw InvalidConfig("imbalanced batch_size must be >= 1");
  }
  if (eval_every < 0) throw InvalidConfig("eval_every must be >= 0");
  if (backbone_depth < 0) throw InvalidConfig("backbone_depth must be >= 0");
  if (backbone_depth > 0 && backbone_width < 1) {
    throw InvalidConfig("backbone_width must be >= 1");
  }
}

std::string TrainLog::train_csv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "epoch,lr,loss\n";
  for (const EpochRecord& r : records) {
    out << r.epoch << "," << r.lr << "," << r.mean_loss << "\n";
  }
  return out.str();
}

std::string TrainLog::timing_csv() const {
  std::ostringstream out;
  out << std::setprecision(6) << std::fixed;
  out << "epoch,seconds\n";
  for (const EpochRecord& r : records) {
    out << r.epoch << "," << r.seconds << "\n";
  }
  return out.str();
}

std::string TrainLog::eval_history_csv() const {
  std::ostringstream out;
  out << std::setprecision(6) << std::fixed;
  out << "epoch,rank1,mAP\n";
  for (const EvalPoint& p : eval_history) {
    out << p.epoch << "," << p.rank1 << "," << p.mean_ap << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Model assembly

int Model::label_of(int identity) const {
  auto it = std::lower_bound(class_ids.begin(), class_ids.end(), identity);
  if (it == class_ids.end() || *it != identity) {
    throw InvalidConfig("identity " + std::to_string(identity) +
                        " has no training class");
  }
  return static_cast<int>(it - class_ids.begin());
}

Model build_model(const ExperimentConfig& config, int data_dim,
                  int num_classes) {
  Model model;
  std::mt19937_64 init_rng(mix_seed(config.seed, 1));
  int d = append_backbone(model.stack, config.backbone_depth,
                          config.backbone_width, data_dim, init_rng);
  HeadConfig head = config.head;
  head.input_dim = d;
  if (head.variant == 'A') head.embedding_dim = d;
  append_head(model.stack, head, init_rng);
  const int emb_dim = head_output_dim(head);

  std::mt19937_64 loss_rng(mix_seed(config.seed, 2));
  if (config.loss_kind == LossKind::kSphere) {
    model.loss = std::make_unique<SphereHead>(num_classes, emb_dim,
                                              config.scale, config.bias,
                                              loss_rng);
  } else {
    model.loss = std::make_unique<SoftmaxHead>(num_classes, emb_dim, loss_rng);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Training loop

Eigen::MatrixXd embed_dataset(LayerStack& stack,
                              const Eigen::MatrixXd& features) {
  if (stack.mode() != Mode::kEval) {
    throw InvalidConfig("embed_dataset requires the stack in eval mode");
  }
  return stack.forward(features);
}

std::vector<GalleryEntry> make_entries(const Eigen::MatrixXd& embeddings,
                                       const FeatureDataset& data,
                                       const std::vector<int>& rows) {
  std::vector<GalleryEntry> entries;
  entries.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int row = rows[i];
    entries.emplace_back(
        EmbeddingVector(embeddings.row(static_cast<Eigen::Index>(i))
                            .transpose()),
        data.identities[row], data.cameras[row]);
  }
  return entries;
}

namespace {

RetrievalReport evaluate_split(Model& model, const FeatureDataset& data,
                               const EvalProtocol& protocol) {
  const std::vector<int> query_rows = data.rows_of(Split::kQuery);
  const std::vector<int> gallery_rows = data.rows_of(Split::kGallery);
  Eigen::MatrixXd qf(query_rows.size(), data.dim());
  for (std::size_t i = 0; i < query_rows.size(); ++i) {
    qf.row(i) = data.features.row(query_rows[i]);
  }
  Eigen::MatrixXd gf(gallery_rows.size(), data.dim());
  for (std::size_t i = 0; i < gallery_rows.size(); ++i) {
    gf.row(i) = data.features.row(gallery_rows[i]);
  }
  const Eigen::MatrixXd qe = embed_dataset(model.stack, qf);
  const Eigen::MatrixXd ge = embed_dataset(model.stack, gf);
  return evaluate(make_entries(qe, data, query_rows),
                  make_entries(ge, data, gallery_rows), protocol);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const FeatureDataset& data,
                                TrainLog* partial_log) {
  config.validate();
  const IdentityIndex index = data.train_index();
  if (index.num_identities() < 1) {
    throw InvalidSpec("dataset has no training samples");
  }
  if (config.balanced &&
      config.sampler.num_identities_per_batch > index.num_identities()) {
    std::ostringstream msg;
    msg << "sampler requires P <= number of training identities (P="
        << config.sampler.num_identities_per_batch
        << ", identities=" << index.num_identities() << ")";
    throw ConfigError(msg.str());
  }

  ExperimentResult result;
  result.model = build_model(config, data.dim(), index.num_identities());
  Model& model = result.model;
  for (const auto& [id, _] : index.groups()) {
    model.class_ids.push_back(id);
  }

  std::vector<Parameter*> params = model.stack.parameters();
  for (Parameter* p : model.loss->parameters()) params.push_back(p);
  AdamOptimizer adam(params, config.adam_beta1, config.adam_beta2,
                     config.adam_epsilon);

  SamplerConfig sampler_config = config.sampler;
  sampler_config.seed = mix_seed(config.seed, 3);
  const std::uint64_t imbalanced_seed = mix_seed(config.seed, 4);

  for (int epoch = 0; epoch < config.total_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at(config.schedule, epoch);

    const EpochPlan plan =
        config.balanced
            ? build_epoch(index, sampler_config, epoch)
            : imbalanced_epoch(index, config.imbalanced_batch_size,
                               imbalanced_seed, epoch);
    for (const auto& [id, count] : exposure_census(plan)) {
      result.exposure[id] += count;
    }
    if (config.balanced && epoch == config.total_epochs - 1) {
      result.final_audit = audit_epoch(plan, index, sampler_config);
    }

    model.stack.set_mode(Mode::kTrain);
    double loss_sum = 0.0;
    for (const Batch& batch : plan.batches) {
      const int n = static_cast<int>(batch.sample_indices.size());
      LossBatch lb;
      lb.features.resize(n, data.dim());
      lb.labels.resize(n);
      for (int i = 0; i < n; ++i) {
        lb.features.row(i) = data.features.row(batch.sample_indices[i]);
        lb.labels[i] = model.label_of(batch.identities[i]);
      }

      model.stack.zero_grad();
      for (Parameter* p : model.loss->parameters()) p->zero_grad();

      double loss = 0.0;
      Eigen::MatrixXd embeddings;
      try {
        embeddings = model.stack.forward(lb.features);
        loss = model.loss->forward({embeddings, lb.labels});
      } catch (const DegenerateNorm&) {
        // exploded parameters poison the norms before the loss itself can
        // go non-finite; only rethrow when the model is still healthy
        bool params_finite = true;
        for (const Parameter* p : params) {
          params_finite = params_finite && p->value.allFinite();
        }
        if (params_finite) throw;
        loss = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(loss)) {
        if (partial_log) *partial_log = result.log;
        throw DivergenceDetected(
            "training diverged: non-finite loss at epoch " +
                std::to_string(epoch),
            epoch);
      }
      LossBatch emb_batch{std::move(embeddings), lb.labels};
      loss_sum += loss;

      const Eigen::MatrixXd grad_emb = model.loss->backward(emb_batch);
      model.stack.backward(grad_emb);
      adam.step(lr);
    }

    const auto t1 = std::chrono::steady_clock::now();
    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.mean_loss =
        plan.batches.empty() ? 0.0 : loss_sum / plan.batches.size();
    record.seconds = std::chrono::duration<double>(t1 - t0).count();
    result.log.records.push_back(record);

    if (config.eval_every > 0 && (epoch + 1) % config.eval_every == 0) {
      model.stack.set_mode(Mode::kEval);
      const RetrievalReport r = evaluate_split(model, data, config.protocol);
      result.log.eval_history.push_back({epoch, r.rank_k(1), r.mean_ap});
      model.stack.set_mode(Mode::kTrain);
    }
  }

  model.stack.set_mode(Mode::kEval);
  result.report = evaluate_split(model, data, config.protocol);
  if (partial_log) *partial_log = result.log;
  return result;
}

}  // namespace sphereml
