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

#ifndef SPHEREML_OPTIM_HPP_
#define SPHEREML_OPTIM_HPP_

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "sphereml/nn.hpp"

namespace sphereml {

/// Learning-rate schedule: a linear warmup ramp followed by a
/// piecewise-constant plateau with step decays. Rates change at epoch
/// granularity only.
struct LrSchedule {
  double warmup_start_lr = 5e-5;
  double base_lr = 1e-3;
  int warmup_epochs = 20;
  std::vector<std::pair<int, double>> decay_points = {{80, 1e-4}, {100, 1e-5}};
  int total_epochs = 140;

  /// Throws InvalidConfig when the fields are inconsistent.
  void validate() const;
};

/// Rate for `epoch`. Warmup interpolates linearly from warmup_start_lr
/// (epoch 0) to base_lr (epoch == warmup_epochs); from the first decay
/// point onward the stated epoch already trains at the decayed rate.
/// Throws OutOfRange outside [0, total_epochs).
double lr_at(const LrSchedule& schedule, int epoch);

/// The stock 140-epoch schedule (5e-5 -> 1e-3 over 20 epochs, decays to
/// 1e-4 at 80 and 1e-5 at 100).
LrSchedule default_schedule();

/// No-warmup ablation: base_lr from epoch 0, same decay points as the
/// default schedule.
LrSchedule constant_schedule(double base_lr);

/// Bias-corrected Adam over a fixed set of parameters. Moment
/// accumulators are created at registration and keyed by position, so the
/// parameter list must stay stable for the lifetime of the optimizer.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<Parameter*> params, double beta1 = 0.9,
                         double beta2 = 0.99, double epsilon = 1e-8);

  /// Applies one update from the gradients currently stored in the
  /// parameters. Throws ShapeMismatch if any gradient shape drifted.
  void step(double lr);

  long step_count() const { return t_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double epsilon() const { return epsilon_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
  long t_ = 0;
  double beta1_, beta2_, epsilon_;
};

}  // namespace sphereml

#endif  // SPHEREML_OPTIM_HPP_
