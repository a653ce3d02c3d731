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

#ifndef SPHEREML_TRAIN_HPP_
#define SPHEREML_TRAIN_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "sphereml/dataset.hpp"
#include "sphereml/eval.hpp"
#include "sphereml/loss.hpp"
#include "sphereml/nn.hpp"
#include "sphereml/optim.hpp"
#include "sphereml/sampler.hpp"

// End-to-end training: sampler -> head stack -> loss -> Adam, with a
// final retrieval evaluation on the query/gallery split. Everything is
// deterministic under the experiment seed.

namespace sphereml {

enum class LossKind { kSphere, kSoftmax };

/// Synthetic stand-in for a ReID dataset: per-identity Gaussian clusters
/// around random unit-direction centers, round-robin camera labels, and a
/// train/query/gallery split per identity.
struct SyntheticDatasetSpec {
  int num_identities = 32;
  std::vector<int> train_counts;  // per identity; may be skewed
  int dim = 32;
  double center_scale = 1.0;
  double noise_scale = 0.02;
  int num_cameras = 2;
  int queries_per_identity = 2;
  int gallery_per_identity = 2;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Train-count ramp from min_count to max_count, geometric so small
/// identities dominate.
std::vector<int> skewed_counts(int num_identities, int min_count,
                               int max_count);

FeatureDataset generate_synthetic(const SyntheticDatasetSpec& spec);

struct ExperimentConfig {
  HeadConfig head;  // input_dim is filled from the data/backbone at run time
  int backbone_depth = 1;
  int backbone_width = 64;
  LossKind loss_kind = LossKind::kSphere;
  double scale = 14.0;
  bool bias = true;
  bool balanced = true;
  SamplerConfig sampler;
  int imbalanced_batch_size = 64;
  LrSchedule schedule;
  int total_epochs = 140;
  // stock Adam moments; beta2 is 0.99 here rather than the usual 0.999
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 42;
  int eval_every = 0;  // 0 = evaluate only after training
  EvalProtocol protocol;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct EvalPoint {
  int epoch = 0;
  double rank1 = 0.0;
  double mean_ap = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> records;
  std::vector<EvalPoint> eval_history;

  /// Deterministic CSV (epoch,lr,loss). Wall time lives in timing_csv so
  /// identical runs stay byte-identical here.
  std::string train_csv() const;
  std::string timing_csv() const;
  std::string eval_history_csv() const;
};

/// A trained (or trainable) model: shared feature stack plus the
/// classification head used only during training.
struct Model {
  LayerStack stack;
  std::unique_ptr<LossHead> loss;
  std::vector<int> class_ids;  // sorted train identities; label = position

  int label_of(int identity) const;
};

/// Assembles backbone + head + loss head for `data_dim` inputs.
Model build_model(const ExperimentConfig& config, int data_dim,
                  int num_classes);

struct ExperimentResult {
  TrainLog log;
  RetrievalReport report;
  Model model;
  AuditReport final_audit;      // last epoch's plan (balanced runs)
  std::map<int, int> exposure;  // cumulative per-identity slot counts
};

/// Runs the full loop. Throws DivergenceDetected when the loss goes
/// non-finite; if `partial_log` is given it receives the completed-epoch
/// records first.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const FeatureDataset& data,
                                TrainLog* partial_log = nullptr);

/// Eval-mode embedding of a feature table, one unit-norm row per input
/// row. Throws InvalidConfig unless the stack is in eval mode.
Eigen::MatrixXd embed_dataset(LayerStack& stack,
                              const Eigen::MatrixXd& features);

/// Rows of `split` as gallery entries (validates unit norms).
std::vector<GalleryEntry> make_entries(const Eigen::MatrixXd& embeddings,
                                       const FeatureDataset& data,
                                       const std::vector<int>& rows);

}  // namespace sphereml

#endif  // SPHEREML_TRAIN_HPP_
