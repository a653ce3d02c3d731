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

#include "sphereml/optim.hpp"

#include <cmath>
#include <sstream>

namespace sphereml {

void LrSchedule::validate() const {
  if (total_epochs < 1) throw InvalidConfig("schedule total_epochs must be >= 1");
  if (warmup_epochs < 0) throw InvalidConfig("schedule warmup_epochs must be >= 0");
  if (!(warmup_start_lr >= 0.0) || !(base_lr >= 0.0)) {
    throw InvalidConfig("schedule learning rates must be >= 0");
  }
  if (warmup_epochs > 0 && warmup_start_lr > base_lr) {
    throw InvalidConfig("schedule warmup_start_lr must not exceed base_lr");
  }
  int prev_epoch = warmup_epochs;
  double prev_lr = base_lr;
  for (const auto& [epoch, lr] : decay_points) {
    if (epoch <= prev_epoch) {
      throw InvalidConfig("schedule decay points must be strictly increasing");
    }
    if (lr >= prev_lr && prev_lr > 0.0) {
      throw InvalidConfig("schedule decay points must decrease the rate");
    }
    prev_epoch = epoch;
    prev_lr = lr;
  }
}

double lr_at(const LrSchedule& schedule, int epoch) {
  if (epoch < 0 || epoch >= schedule.total_epochs) {
    std::ostringstream msg;
    msg << "epoch " << epoch << " outside [0, " << schedule.total_epochs << ")";
    throw OutOfRange(msg.str());
  }
  if (epoch < schedule.warmup_epochs) {
    const double t =
        static_cast<double>(epoch) / static_cast<double>(schedule.warmup_epochs);
    return schedule.warmup_start_lr +
           t * (schedule.base_lr - schedule.warmup_start_lr);
  }
  double lr = schedule.base_lr;
  for (const auto& [decay_epoch, decay_lr] : schedule.decay_points) {
    if (epoch >= decay_epoch) lr = decay_lr;
  }
  return lr;
}

LrSchedule default_schedule() { return LrSchedule{}; }

LrSchedule constant_schedule(double base_lr) {
  LrSchedule s = default_schedule();
  s.base_lr = base_lr;
  s.warmup_start_lr = base_lr;
  s.warmup_epochs = 0;
  return s;
}

AdamOptimizer::AdamOptimizer(std::vector<Parameter*> params, double beta1,
                             double beta2, double epsilon)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2),
      epsilon_(epsilon) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidConfig("adam betas must lie in [0,1)");
  }
  if (!(epsilon > 0.0)) throw InvalidConfig("adam epsilon must be > 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamOptimizer::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw ShapeMismatch("adam step: gradient shape mismatch for " + p.name);
    }
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i].array().matrix() +
            (1.0 - beta2_) * p.grad.array().square().matrix();
    // bias-corrected update
    Eigen::ArrayXXd m_hat = m_[i].array() / bc1;
    Eigen::ArrayXXd v_hat = v_[i].array() / bc2;
    p.value.array() -= lr * m_hat / (v_hat.sqrt() + epsilon_);
  }
}

}  // namespace sphereml
