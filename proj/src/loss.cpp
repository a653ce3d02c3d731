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

#include "sphereml/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sphereml/manifold.hpp"

namespace sphereml {

namespace {

// clamps to [-1, 1] while letting NaN poison values flow through
double clamp_cosine(double c) {
  if (std::isnan(c)) return c;
  return std::clamp(c, -1.0, 1.0);
}

void validate_batch(const LossBatch& batch, int num_classes, int dim) {
  if (batch.features.rows() < 1) {
    throw InvalidConfig("loss batch must hold at least one sample");
  }
  if (batch.features.cols() != dim) {
    std::ostringstream msg;
    msg << "loss batch feature dim " << batch.features.cols()
        << " != head dim " << dim;
    throw DimensionMismatch(msg.str());
  }
  if (static_cast<Eigen::Index>(batch.labels.size()) != batch.features.rows()) {
    throw DimensionMismatch("loss batch labels/features length mismatch");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= num_classes) {
      throw InvalidConfig("loss batch label out of range");
    }
  }
}

}  // namespace

Eigen::MatrixXd stable_softmax(const Eigen::MatrixXd& logits,
                               const std::vector<int>& labels, double* loss) {
  const Eigen::Index n = logits.rows();
  Eigen::MatrixXd probs(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zmax = logits.row(i).maxCoeff();
    Eigen::ArrayXd shifted = logits.row(i).transpose().array() - zmax;
    Eigen::ArrayXd ex = shifted.exp();
    const double sum = ex.sum();
    probs.row(i) = (ex / sum).transpose();
    if (loss) {
      const double lse = zmax + std::log(sum);
      total += lse - logits(i, labels[i]);
    }
  }
  if (loss) *loss = total / static_cast<double>(n);
  return probs;
}

// ---------------------------------------------------------------------------
// SphereHead

SphereHead::SphereHead(int num_classes, int dim, double scale, bool with_bias,
                       std::mt19937_64& rng)
    : weight_("weight", Eigen::MatrixXd::Zero(num_classes, dim)),
      scale_(scale) {
  if (num_classes < 1 || dim < 1) {
    throw InvalidConfig("sphere head needs num_classes >= 1 and dim >= 1");
  }
  if (!(scale > 0.0)) throw InvalidConfig("sphere head scale must be > 0");
  glorot_init(weight_.value, dim, num_classes, rng);
  if (with_bias) {
    bias_.emplace("bias", Eigen::MatrixXd::Zero(num_classes, 1));
  }
}

Eigen::MatrixXd SphereHead::logits(const Eigen::MatrixXd& features) const {
  if (features.cols() != weight_.value.cols()) {
    throw DimensionMismatch("sphere logits: feature dim mismatch");
  }
  Eigen::MatrixXd x_hat = l2_normalize_rows(features);
  Eigen::MatrixXd w_hat = l2_normalize_rows(weight_.value);
  // clamp rounding drift so the no-bias logits always lie in [-s, s]
  Eigen::MatrixXd cos =
      (x_hat * w_hat.transpose()).unaryExpr(&clamp_cosine);
  Eigen::MatrixXd out = scale_ * cos;
  if (bias_) {
    out.rowwise() += bias_->value.col(0).transpose();
  }
  return out;
}

double SphereHead::forward(const LossBatch& batch) {
  validate_batch(batch, num_classes(), static_cast<int>(weight_.value.cols()));
  // non-finite norms poison their row so an exploding run surfaces as a
  // non-finite loss; only finite-but-tiny norms are hard errors
  auto checked_norm = [](double n, const char* what) {
    if (!std::isfinite(n)) return std::numeric_limits<double>::quiet_NaN();
    if (n <= kNormFloor) throw DegenerateNorm(what);
    return n;
  };
  x_norms_.resize(batch.features.rows());
  for (Eigen::Index i = 0; i < batch.features.rows(); ++i) {
    x_norms_(i) = checked_norm(batch.features.row(i).norm(),
                               "sphere loss: degenerate feature norm");
  }
  w_norms_.resize(weight_.value.rows());
  for (Eigen::Index j = 0; j < weight_.value.rows(); ++j) {
    w_norms_(j) = checked_norm(weight_.value.row(j).norm(),
                               "sphere loss: degenerate weight row norm");
  }
  x_hat_ = batch.features.array().colwise() / x_norms_.array();
  w_hat_ = weight_.value.array().colwise() / w_norms_.array();

  Eigen::MatrixXd z =
      scale_ * (x_hat_ * w_hat_.transpose()).unaryExpr(&clamp_cosine);
  if (bias_) z.rowwise() += bias_->value.col(0).transpose();

  double loss = 0.0;
  probs_ = stable_softmax(z, batch.labels, &loss);
  cache_valid_ = true;
  return loss;
}

Eigen::MatrixXd SphereHead::backward(const LossBatch& batch) {
  if (!cache_valid_) {
    throw StaleCache("sphere loss backward without matching forward");
  }
  const Eigen::Index n = batch.features.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  // dL/dlogit = (p - onehot)/N
  Eigen::MatrixXd g = probs_ * inv_n;
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, batch.labels[i]) -= inv_n;
  }

  if (bias_) {
    bias_->grad.col(0) += g.colwise().sum().transpose();
  }

  // through the bilinear cosine and the feature-side normalization Jacobian
  Eigen::MatrixXd du = scale_ * (g * w_hat_);  // N x d, dL/d(x_hat)
  Eigen::MatrixXd grad_x(n, batch.features.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double radial = du.row(i).dot(x_hat_.row(i));
    grad_x.row(i) =
        (du.row(i) - radial * x_hat_.row(i)) / x_norms_(i);
  }

  // weight-side normalization Jacobian
  Eigen::MatrixXd dw = scale_ * (g.transpose() * x_hat_);  // C x d
  for (Eigen::Index j = 0; j < weight_.value.rows(); ++j) {
    const double radial = dw.row(j).dot(w_hat_.row(j));
    weight_.grad.row(j) +=
        (dw.row(j) - radial * w_hat_.row(j)) / w_norms_(j);
  }

  cache_valid_ = false;
  return grad_x;
}

std::vector<Parameter*> SphereHead::parameters() {
  std::vector<Parameter*> out{&weight_};
  if (bias_) out.push_back(&*bias_);
  return out;
}

int SphereHead::classify_by_angle(const Eigen::VectorXd& feature) const {
  if (feature.size() != weight_.value.cols()) {
    throw DimensionMismatch("classify_by_angle: feature dim mismatch");
  }
  Eigen::VectorXd x_hat = l2_normalize(feature);
  int best = 0;
  double best_cos = -2.0;
  for (Eigen::Index j = 0; j < weight_.value.rows(); ++j) {
    const double c =
        cosine_similarity(l2_normalize(weight_.value.row(j).transpose()),
                          x_hat);
    if (c > best_cos) {
      best_cos = c;
      best = static_cast<int>(j);
    }
  }
  return best;
}

const Eigen::MatrixXd& SphereHead::cached_probabilities() const {
  if (!cache_valid_) {
    throw StaleCache("no cached softmax probabilities");
  }
  return probs_;
}

// ---------------------------------------------------------------------------
// SoftmaxHead

SoftmaxHead::SoftmaxHead(int num_classes, int dim, std::mt19937_64& rng)
    : weight_("weight", Eigen::MatrixXd::Zero(num_classes, dim)) {
  if (num_classes < 1 || dim < 1) {
    throw InvalidConfig("softmax head needs num_classes >= 1 and dim >= 1");
  }
  glorot_init(weight_.value, dim, num_classes, rng);
}

Eigen::MatrixXd SoftmaxHead::logits(const Eigen::MatrixXd& features) const {
  if (features.cols() != weight_.value.cols()) {
    throw DimensionMismatch("softmax logits: feature dim mismatch");
  }
  return features * weight_.value.transpose();
}

double SoftmaxHead::forward(const LossBatch& batch) {
  validate_batch(batch, num_classes(), static_cast<int>(weight_.value.cols()));
  double loss = 0.0;
  probs_ = stable_softmax(logits(batch.features), batch.labels, &loss);
  cache_valid_ = true;
  return loss;
}

Eigen::MatrixXd SoftmaxHead::backward(const LossBatch& batch) {
  if (!cache_valid_) {
    throw StaleCache("softmax loss backward without matching forward");
  }
  const Eigen::Index n = batch.features.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd g = probs_ * inv_n;
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, batch.labels[i]) -= inv_n;
  }
  weight_.grad += g.transpose() * batch.features;
  cache_valid_ = false;
  return g * weight_.value;
}

std::vector<Parameter*> SoftmaxHead::parameters() { return {&weight_}; }

}  // namespace sphereml
