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

#include "sphereml/nn.hpp"

#include <cmath>
#include <sstream>

#include "sphereml/manifold.hpp"

namespace sphereml {

void glorot_init(Eigen::MatrixXd& w, int fan_in, int fan_out,
                 std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      w(i, j) = dist(rng);
    }
  }
}

// ---------------------------------------------------------------------------
// DenseLayer

DenseLayer::DenseLayer(int in_dim, int out_dim, bool with_bias,
                       std::mt19937_64& rng)
    : weight_("weight", Eigen::MatrixXd::Zero(out_dim, in_dim)) {
  if (in_dim < 1 || out_dim < 1) {
    throw InvalidConfig("dense layer dimensions must be positive");
  }
  glorot_init(weight_.value, in_dim, out_dim, rng);
  if (with_bias) {
    bias_.emplace("bias", Eigen::MatrixXd::Zero(out_dim, 1));
  }
}

Eigen::MatrixXd DenseLayer::forward(const Eigen::MatrixXd& x, Mode mode) {
  if (x.cols() != weight_.value.cols()) {
    std::ostringstream msg;
    msg << "dense forward: input dim " << x.cols() << " != " << weight_.value.cols();
    throw DimensionMismatch(msg.str());
  }
  if (mode == Mode::kTrain) {
    cached_input_ = x;
    cache_valid_ = true;
  } else {
    cache_valid_ = false;
  }
  Eigen::MatrixXd y = x * weight_.value.transpose();
  if (bias_) {
    y.rowwise() += bias_->value.col(0).transpose();
  }
  return y;
}

Eigen::MatrixXd DenseLayer::backward(const Eigen::MatrixXd& upstream) {
  if (!cache_valid_) {
    throw StaleCache("dense backward without cached train-mode forward");
  }
  if (upstream.rows() != cached_input_.rows() ||
      upstream.cols() != weight_.value.rows()) {
    throw DimensionMismatch("dense backward: upstream shape mismatch");
  }
  weight_.grad += upstream.transpose() * cached_input_;
  if (bias_) {
    bias_->grad.col(0) += upstream.colwise().sum().transpose();
  }
  return upstream * weight_.value;
}

std::vector<Parameter*> DenseLayer::parameters() {
  std::vector<Parameter*> out{&weight_};
  if (bias_) out.push_back(&*bias_);
  return out;
}

// ---------------------------------------------------------------------------
// BatchNormLayer

BatchNormLayer::BatchNormLayer(int dim, double momentum, double epsilon)
    : gamma_("gamma", Eigen::MatrixXd::Ones(dim, 1)),
      beta_("beta", Eigen::MatrixXd::Zero(dim, 1)),
      running_mean_(Eigen::VectorXd::Zero(dim)),
      running_var_(Eigen::VectorXd::Ones(dim)),
      momentum_(momentum),
      epsilon_(epsilon) {
  if (dim < 1) throw InvalidConfig("batchnorm dimension must be positive");
  if (!(momentum > 0.0 && momentum < 1.0)) {
    throw InvalidConfig("batchnorm momentum must lie in (0,1)");
  }
  if (!(epsilon > 0.0)) throw InvalidConfig("batchnorm epsilon must be > 0");
}

Eigen::MatrixXd BatchNormLayer::forward(const Eigen::MatrixXd& x, Mode mode) {
  if (x.cols() != gamma_.value.rows()) {
    throw DimensionMismatch("batchnorm forward: feature dim mismatch");
  }
  const Eigen::Index n = x.rows();
  if (mode == Mode::kEval) {
    cache_valid_ = false;
    Eigen::ArrayXd scale =
        gamma_.value.col(0).array() / (running_var_.array() + epsilon_).sqrt();
    Eigen::ArrayXd shift =
        beta_.value.col(0).array() - running_mean_.array() * scale;
    Eigen::MatrixXd out =
        (x.array().rowwise() * scale.transpose()).rowwise() +
        shift.transpose();
    return out;
  }

  if (n < 2) {
    throw BatchTooSmall("batchnorm train mode requires batch size >= 2");
  }
  Eigen::VectorXd mean = x.colwise().mean();
  centered_ = x.rowwise() - mean.transpose();
  // biased (1/N) variance for normalization
  Eigen::VectorXd var = centered_.array().square().colwise().mean();
  inv_std_ = (var.array() + epsilon_).rsqrt();
  xhat_ = centered_.array().rowwise() * inv_std_.transpose().array();
  cache_valid_ = true;

  // running statistics keep the unbiased variance estimate
  const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
  running_mean_ = (1.0 - momentum_) * running_mean_ + momentum_ * mean;
  running_var_ = (1.0 - momentum_) * running_var_ + momentum_ * (unbias * var);

  Eigen::MatrixXd out = xhat_.array().rowwise() *
                        gamma_.value.col(0).transpose().array();
  out.rowwise() += beta_.value.col(0).transpose();
  return out;
}

Eigen::MatrixXd BatchNormLayer::backward(const Eigen::MatrixXd& upstream) {
  if (!cache_valid_) {
    throw StaleCache("batchnorm backward without cached train-mode forward");
  }
  if (upstream.rows() != xhat_.rows() || upstream.cols() != xhat_.cols()) {
    throw DimensionMismatch("batchnorm backward: upstream shape mismatch");
  }
  const double n = static_cast<double>(upstream.rows());

  beta_.grad.col(0) += upstream.colwise().sum().transpose();
  gamma_.grad.col(0) +=
      (upstream.array() * xhat_.array()).colwise().sum().transpose().matrix();

  // chain rule through the batch statistics
  Eigen::MatrixXd dxhat =
      upstream.array().rowwise() * gamma_.value.col(0).transpose().array();
  Eigen::ArrayXd sum_dxhat = dxhat.colwise().sum().transpose().array();
  Eigen::ArrayXd sum_dxhat_centered =
      (dxhat.array() * centered_.array()).colwise().sum().transpose().array();
  Eigen::ArrayXd sum_centered = centered_.colwise().sum().transpose().array();

  Eigen::ArrayXd dvar = -0.5 * sum_dxhat_centered * inv_std_.array().cube();
  Eigen::ArrayXd dmean =
      -sum_dxhat * inv_std_.array() + dvar * sum_centered * (-2.0 / n);

  Eigen::MatrixXd dx =
      dxhat.array().rowwise() * inv_std_.transpose().array();
  dx.array().rowwise() += dmean.transpose() / n;
  dx.array() += centered_.array().rowwise() * (dvar.transpose() * 2.0 / n);
  return dx;
}

std::vector<Parameter*> BatchNormLayer::parameters() {
  return {&gamma_, &beta_};
}

std::vector<std::pair<std::string, Eigen::VectorXd*>>
BatchNormLayer::buffers() {
  return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
}

// ---------------------------------------------------------------------------
// DropoutLayer

DropoutLayer::DropoutLayer(double ratio, std::uint64_t seed)
    : ratio_(ratio), rng_(seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw InvalidConfig("dropout ratio must lie in [0,1)");
  }
}

Eigen::MatrixXd DropoutLayer::forward(const Eigen::MatrixXd& x, Mode mode) {
  if (mode == Mode::kEval || ratio_ == 0.0) {
    mask_ = Eigen::MatrixXd::Ones(x.rows(), x.cols());
    cache_valid_ = (mode == Mode::kTrain);
    return x;
  }
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  mask_.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      mask_(i, j) = dist(rng_) < ratio_ ? 0.0 : 1.0;
    }
  }
  cache_valid_ = true;
  return (x.array() * mask_.array()) / (1.0 - ratio_);
}

Eigen::MatrixXd DropoutLayer::backward(const Eigen::MatrixXd& upstream) {
  if (!cache_valid_) {
    throw StaleCache("dropout backward without cached train-mode forward");
  }
  if (upstream.rows() != mask_.rows() || upstream.cols() != mask_.cols()) {
    throw DimensionMismatch("dropout backward: upstream shape mismatch");
  }
  return (upstream.array() * mask_.array()) / (1.0 - ratio_);
}

// ---------------------------------------------------------------------------
// ReluLayer

Eigen::MatrixXd ReluLayer::forward(const Eigen::MatrixXd& x, Mode mode) {
  mask_ = (x.array() > 0.0).cast<double>();
  cache_valid_ = (mode == Mode::kTrain);
  return x.cwiseMax(0.0);
}

Eigen::MatrixXd ReluLayer::backward(const Eigen::MatrixXd& upstream) {
  if (!cache_valid_) {
    throw StaleCache("relu backward without cached train-mode forward");
  }
  if (upstream.rows() != mask_.rows() || upstream.cols() != mask_.cols()) {
    throw DimensionMismatch("relu backward: upstream shape mismatch");
  }
  return upstream.array() * mask_.array();
}

// ---------------------------------------------------------------------------
// L2NormLayer

Eigen::MatrixXd L2NormLayer::forward(const Eigen::MatrixXd& x, Mode mode) {
  if (mode == Mode::kTrain) {
    cached_input_ = x;
    cache_valid_ = true;
  } else {
    cache_valid_ = false;
  }
  return l2_normalize_rows(x);
}

Eigen::MatrixXd L2NormLayer::backward(const Eigen::MatrixXd& upstream) {
  if (!cache_valid_) {
    throw StaleCache("l2norm backward without cached train-mode forward");
  }
  if (upstream.rows() != cached_input_.rows() ||
      upstream.cols() != cached_input_.cols()) {
    throw DimensionMismatch("l2norm backward: upstream shape mismatch");
  }
  Eigen::MatrixXd dx(upstream.rows(), upstream.cols());
  for (Eigen::Index i = 0; i < upstream.rows(); ++i) {
    dx.row(i) = l2_normalize_backward(cached_input_.row(i).transpose(),
                                      upstream.row(i).transpose())
                    .transpose();
  }
  return dx;
}

// ---------------------------------------------------------------------------
// LayerStack

void LayerStack::add(std::string name, std::unique_ptr<Layer> layer) {
  names_.push_back(std::move(name));
  layers_.push_back(std::move(layer));
}

Eigen::MatrixXd LayerStack::forward(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd h = x;
  for (auto& layer : layers_) {
    h = layer->forward(h, mode_);
  }
  return h;
}

Eigen::MatrixXd LayerStack::backward(const Eigen::MatrixXd& upstream) {
  Eigen::MatrixXd g = upstream;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->backward(g);
  }
  return g;
}

void LayerStack::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::vector<Parameter*> LayerStack::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    for (Parameter* p : layer->parameters()) out.push_back(p);
  }
  return out;
}

std::map<std::string, Eigen::MatrixXd> LayerStack::export_tensors() {
  std::map<std::string, Eigen::MatrixXd> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (Parameter* p : layers_[i]->parameters()) {
      out[names_[i] + "." + p->name] = p->value;
    }
    for (auto& [name, buf] : layers_[i]->buffers()) {
      out[names_[i] + "." + name] = *buf;
    }
  }
  return out;
}

void LayerStack::import_tensors(
    const std::map<std::string, Eigen::MatrixXd>& tensors) {
  auto fetch = [&](const std::string& key) -> const Eigen::MatrixXd& {
    auto it = tensors.find(key);
    if (it == tensors.end()) {
      throw ShapeMismatch("checkpoint missing tensor " + key);
    }
    return it->second;
  };
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (Parameter* p : layers_[i]->parameters()) {
      const Eigen::MatrixXd& t = fetch(names_[i] + "." + p->name);
      if (t.rows() != p->value.rows() || t.cols() != p->value.cols()) {
        throw ShapeMismatch("checkpoint tensor shape mismatch for " +
                            names_[i] + "." + p->name);
      }
      p->value = t;
    }
    for (auto& [name, buf] : layers_[i]->buffers()) {
      const Eigen::MatrixXd& t = fetch(names_[i] + "." + name);
      if (t.rows() != buf->size() || t.cols() != 1) {
        throw ShapeMismatch("checkpoint tensor shape mismatch for " +
                            names_[i] + "." + name);
      }
      *buf = t.col(0);
    }
  }
}

int LayerStack::output_dim(int input_dim) const {
  int d = input_dim;
  for (const auto& layer : layers_) d = layer->output_dim(d);
  return d;
}

// ---------------------------------------------------------------------------
// Head construction

int head_output_dim(const HeadConfig& config) {
  return config.variant == 'A' ? config.input_dim : config.embedding_dim;
}

void append_head(LayerStack& stack, const HeadConfig& config,
                 std::mt19937_64& rng) {
  if (config.input_dim < 1) {
    throw InvalidConfig("head input_dim must be positive");
  }
  if (config.variant != 'A' && config.embedding_dim < 1) {
    throw InvalidConfig("head embedding_dim must be positive");
  }
  if (!(config.dropout_ratio >= 0.0 && config.dropout_ratio < 1.0)) {
    throw InvalidConfig("head dropout_ratio must lie in [0,1)");
  }

  int idx = 0;
  auto add = [&](std::unique_ptr<Layer> layer) {
    stack.add("head." + std::to_string(idx++), std::move(layer));
  };

  switch (config.variant) {
    case 'A':
      break;
    case 'B':
      add(std::make_unique<DenseLayer>(config.input_dim, config.embedding_dim,
                                       true, rng));
      break;
    case 'C':
      add(std::make_unique<DenseLayer>(config.input_dim, config.embedding_dim,
                                       true, rng));
      add(std::make_unique<BatchNormLayer>(config.embedding_dim));
      break;
    case 'D':
      add(std::make_unique<BatchNormLayer>(config.input_dim));
      add(std::make_unique<DropoutLayer>(config.dropout_ratio, rng()));
      add(std::make_unique<DenseLayer>(config.input_dim, config.embedding_dim,
                                       true, rng));
      add(std::make_unique<BatchNormLayer>(config.embedding_dim));
      break;
    default:
      throw InvalidConfig(std::string("unknown head variant '") +
                          config.variant + "'");
  }
  add(std::make_unique<L2NormLayer>());
}

LayerStack build_head(const HeadConfig& config, std::mt19937_64& rng) {
  LayerStack stack;
  append_head(stack, config, rng);
  return stack;
}

int append_backbone(LayerStack& stack, int depth, int width, int input_dim,
                    std::mt19937_64& rng) {
  if (depth < 0) throw InvalidConfig("backbone depth must be >= 0");
  if (depth > 0 && width < 1) {
    throw InvalidConfig("backbone width must be positive");
  }
  int d = input_dim;
  for (int i = 0; i < depth; ++i) {
    stack.add("backbone." + std::to_string(2 * i),
              std::make_unique<DenseLayer>(d, width, true, rng));
    stack.add("backbone." + std::to_string(2 * i + 1),
              std::make_unique<ReluLayer>());
    d = width;
  }
  return d;
}

}  // namespace sphereml
