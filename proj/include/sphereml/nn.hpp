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

#ifndef SPHEREML_NN_HPP_
#define SPHEREML_NN_HPP_

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sphereml/errors.hpp"

// Minimal dense layers with exact forward/backward, composed into the
// embedding-head variants A-D. Batches are row-major: one sample per row.

namespace sphereml {

enum class Mode { kTrain, kEval };

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Parameter(std::string n, Eigen::MatrixXd v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Eigen::MatrixXd::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

/// Glorot-uniform fill: entries in +-sqrt(6 / (fan_in + fan_out)).
void glorot_init(Eigen::MatrixXd& w, int fan_in, int fan_out,
                 std::mt19937_64& rng);

class Layer {
 public:
  virtual ~Layer() = default;

  /// Train-mode forward caches whatever backward needs; eval-mode forward
  /// invalidates the cache.
  virtual Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) = 0;

  /// Gradient of the cached train-mode forward. Accumulates parameter
  /// gradients and returns the gradient with respect to the input.
  /// Throws StaleCache without a preceding train-mode forward.
  virtual Eigen::MatrixXd backward(const Eigen::MatrixXd& upstream) = 0;

  virtual std::vector<Parameter*> parameters() { return {}; }

  /// Non-trainable state that still belongs in a checkpoint (BN running
  /// statistics).
  virtual std::vector<std::pair<std::string, Eigen::VectorXd*>> buffers() {
    return {};
  }

  virtual int output_dim(int input_dim) const { return input_dim; }
  virtual std::string kind() const = 0;
};

/// Fully connected layer; weight is (out x in), bias optional.
class DenseLayer : public Layer {
 public:
  DenseLayer(int in_dim, int out_dim, bool with_bias, std::mt19937_64& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& upstream) override;
  std::vector<Parameter*> parameters() override;
  int output_dim(int) const override { return static_cast<int>(weight_.value.rows()); }
  std::string kind() const override { return "dense"; }

  Parameter& weight() { return weight_; }
  Parameter* bias() { return bias_ ? &*bias_ : nullptr; }

 private:
  Parameter weight_;
  std::optional<Parameter> bias_;
  Eigen::MatrixXd cached_input_;
  bool cache_valid_ = false;
};

/// Batch normalization with affine parameters and running statistics.
/// Train mode normalizes by the biased (1/N) batch variance; running_var
/// stores the unbiased estimate.
class BatchNormLayer : public Layer {
 public:
  explicit BatchNormLayer(int dim, double momentum = 0.1,
                          double epsilon = 1e-5);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& upstream) override;
  std::vector<Parameter*> parameters() override;
  std::vector<std::pair<std::string, Eigen::VectorXd*>> buffers() override;
  std::string kind() const override { return "batchnorm"; }

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  const Eigen::VectorXd& running_mean() const { return running_mean_; }
  const Eigen::VectorXd& running_var() const { return running_var_; }
  double epsilon() const { return epsilon_; }

 private:
  Parameter gamma_;
  Parameter beta_;
  Eigen::VectorXd running_mean_;
  Eigen::VectorXd running_var_;
  double momentum_;
  double epsilon_;
  // train-mode cache
  Eigen::MatrixXd centered_;
  Eigen::MatrixXd xhat_;
  Eigen::VectorXd inv_std_;
  bool cache_valid_ = false;
};

/// Inverted dropout: units are zeroed with probability `ratio` in train
/// mode and survivors are scaled by 1/(1-ratio), so eval mode is the
/// identity.
class DropoutLayer : public Layer {
 public:
  DropoutLayer(double ratio, std::uint64_t seed);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& upstream) override;
  std::string kind() const override { return "dropout"; }

  void reseed(std::uint64_t seed) { rng_.seed(seed); }
  double ratio() const { return ratio_; }
  /// Mask from the last train-mode forward (1 = kept).
  const Eigen::MatrixXd& last_mask() const { return mask_; }

 private:
  double ratio_;
  std::mt19937_64 rng_;
  Eigen::MatrixXd mask_;
  bool cache_valid_ = false;
};

class ReluLayer : public Layer {
 public:
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& upstream) override;
  std::string kind() const override { return "relu"; }

 private:
  Eigen::MatrixXd mask_;
  bool cache_valid_ = false;
};

/// Row-wise L2 normalization; the terminal layer of every head stack.
class L2NormLayer : public Layer {
 public:
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& upstream) override;
  std::string kind() const override { return "l2norm"; }

 private:
  Eigen::MatrixXd cached_input_;
  bool cache_valid_ = false;
};

/// An ordered stack of layers sharing one train/eval mode.
class LayerStack {
 public:
  LayerStack() = default;
  LayerStack(LayerStack&&) = default;
  LayerStack& operator=(LayerStack&&) = default;

  void add(std::string name, std::unique_ptr<Layer> layer);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& upstream);

  void set_mode(Mode mode) { mode_ = mode; }
  Mode mode() const { return mode_; }
  void zero_grad();

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  /// Parameters in stack order (optimizer order is deterministic).
  std::vector<Parameter*> parameters();

  /// All tensors, keyed "<layer>.<field>", parameters and buffers alike.
  std::map<std::string, Eigen::MatrixXd> export_tensors();
  /// Restores tensors exported by export_tensors; throws ShapeMismatch on
  /// any missing key or shape disagreement.
  void import_tensors(const std::map<std::string, Eigen::MatrixXd>& tensors);

  int output_dim(int input_dim) const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::string> names_;
  Mode mode_ = Mode::kTrain;
};

/// Embedding-head description. Variant A keeps the input dimension;
/// B, C and D emit embedding_dim.
struct HeadConfig {
  char variant = 'D';  // one of A, B, C, D
  int embedding_dim = 0;
  double dropout_ratio = 0.0;
  int input_dim = 0;
};

/// Output dimension of a head built from `config`.
int head_output_dim(const HeadConfig& config);

/// Appends the head layers for `config`:
///   A: [L2]
///   B: [FC, L2]
///   C: [FC, BN, L2]
///   D: [BN, DP, FC, BN, L2]
/// Layer names are "head.<i>". Throws InvalidConfig on a bad config.
void append_head(LayerStack& stack, const HeadConfig& config,
                 std::mt19937_64& rng);

/// Builds a fresh stack holding only the head.
LayerStack build_head(const HeadConfig& config, std::mt19937_64& rng);

/// Appends `depth` blocks of [FC(width), ReLU] named "backbone.<i>".
/// Returns the resulting feature dimension.
int append_backbone(LayerStack& stack, int depth, int width, int input_dim,
                    std::mt19937_64& rng);

}  // namespace sphereml

#endif  // SPHEREML_NN_HPP_
