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

#ifndef SPHEREML_LOSS_HPP_
#define SPHEREML_LOSS_HPP_

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <vector>

#include "sphereml/nn.hpp"

namespace sphereml {

/// A classification batch: raw (unnormalized) features, one row per
/// sample, with integer labels.
struct LossBatch {
  Eigen::MatrixXd features;  // N x d
  std::vector<int> labels;   // N, each in [0, C)
};

/// Common surface of the two classification heads so the training loop
/// can swap them.
class LossHead {
 public:
  virtual ~LossHead() = default;
  /// Mean cross-entropy over the batch; caches softmax state for backward.
  virtual double forward(const LossBatch& batch) = 0;
  /// Gradient of the cached forward. Accumulates parameter gradients and
  /// returns the gradient with respect to the raw features.
  /// Throws StaleCache without a matching forward.
  virtual Eigen::MatrixXd backward(const LossBatch& batch) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual int num_classes() const = 0;
};

/// Classification on the hypersphere: logits are s * cos(theta_ij) (+ b_j
/// when the bias is enabled), where both the feature rows and the class
/// weight rows are L2-normalized inside the computation graph. Raw weights
/// are stored and renormalized on every forward so they receive correct
/// gradients.
class SphereHead : public LossHead {
 public:
  SphereHead(int num_classes, int dim, double scale, bool with_bias,
             std::mt19937_64& rng);

  /// logit[i][j] = scale * cos(theta_ij) (+ bias_j). Without bias every
  /// logit lies in [-scale, scale].
  Eigen::MatrixXd logits(const Eigen::MatrixXd& features) const;

  double forward(const LossBatch& batch) override;
  Eigen::MatrixXd backward(const LossBatch& batch) override;
  std::vector<Parameter*> parameters() override;
  int num_classes() const override {
    return static_cast<int>(weight_.value.rows());
  }

  /// argmax_j cos(theta_j), bias ignored; ties go to the lowest index.
  int classify_by_angle(const Eigen::VectorXd& feature) const;

  double scale() const { return scale_; }
  bool has_bias() const { return bias_.has_value(); }
  Parameter& weight() { return weight_; }
  Parameter* bias() { return bias_ ? &*bias_ : nullptr; }

  /// Softmax probabilities cached by the last forward (rows sum to 1).
  const Eigen::MatrixXd& cached_probabilities() const;

 private:
  Parameter weight_;  // raw class weights W*, C x d
  std::optional<Parameter> bias_;
  double scale_;

  // forward cache
  Eigen::MatrixXd x_hat_, w_hat_, probs_;
  Eigen::VectorXd x_norms_, w_norms_;
  bool cache_valid_ = false;
};

/// Plain softmax cross-entropy over z = W x with the bias fixed to zero.
class SoftmaxHead : public LossHead {
 public:
  SoftmaxHead(int num_classes, int dim, std::mt19937_64& rng);

  Eigen::MatrixXd logits(const Eigen::MatrixXd& features) const;

  double forward(const LossBatch& batch) override;
  Eigen::MatrixXd backward(const LossBatch& batch) override;
  std::vector<Parameter*> parameters() override;
  int num_classes() const override {
    return static_cast<int>(weight_.value.rows());
  }

  Parameter& weight() { return weight_; }

 private:
  Parameter weight_;  // C x d
  Eigen::MatrixXd probs_;
  bool cache_valid_ = false;
};

/// Row-wise softmax with max subtraction; `loss` gets the mean
/// cross-entropy of `labels` under the returned probabilities.
Eigen::MatrixXd stable_softmax(const Eigen::MatrixXd& logits,
                               const std::vector<int>& labels, double* loss);

}  // namespace sphereml

#endif  // SPHEREML_LOSS_HPP_
