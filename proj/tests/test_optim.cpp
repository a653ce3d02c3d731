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

#include <doctest.h>

#include <cmath>

#include "sphereml/optim.hpp"

using namespace sphereml;

TEST_CASE("lr_at hits the schedule anchors exactly") {
  const LrSchedule s = default_schedule();
  s.validate();
  CHECK(lr_at(s, 0) == 5e-5);
  CHECK(lr_at(s, 20) == 1e-3);
  CHECK(lr_at(s, 79) == 1e-3);
  CHECK(lr_at(s, 80) == 1e-4);
  CHECK(lr_at(s, 99) == 1e-4);
  CHECK(lr_at(s, 100) == 1e-5);
  CHECK(lr_at(s, 139) == 1e-5);
  CHECK(lr_at(s, 10) == 5.25e-4);  // linear warmup midpoint
}

TEST_CASE("lr_at rejects epochs outside the schedule") {
  const LrSchedule s = default_schedule();
  CHECK_THROWS_AS(lr_at(s, -1), OutOfRange);
  CHECK_THROWS_AS(lr_at(s, 140), OutOfRange);
}

TEST_CASE("constant_schedule starts at base and keeps the decays") {
  const LrSchedule s = constant_schedule(1e-3);
  s.validate();
  CHECK(lr_at(s, 0) == 1e-3);
  CHECK(lr_at(s, 80) == 1e-4);
  CHECK(lr_at(s, 100) == 1e-5);
  for (int epoch = 0; epoch < 140; ++epoch) {
    const double lr = lr_at(s, epoch);
    CHECK(std::isfinite(lr));
    CHECK(lr > 0.0);
  }
}

TEST_CASE("lr_at is nondecreasing through warmup, nonincreasing after") {
  const LrSchedule s = default_schedule();
  for (int epoch = 1; epoch <= s.warmup_epochs; ++epoch) {
    CHECK(lr_at(s, epoch) >= lr_at(s, epoch - 1));
  }
  for (int epoch = s.warmup_epochs + 1; epoch < s.total_epochs; ++epoch) {
    CHECK(lr_at(s, epoch) <= lr_at(s, epoch - 1));
  }
}

TEST_CASE("schedule validation catches inconsistent fields") {
  LrSchedule bad = default_schedule();
  bad.decay_points = {{100, 1e-4}, {80, 1e-5}};
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  bad = default_schedule();
  bad.decay_points = {{80, 1e-2}};  // increases the rate
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  bad = default_schedule();
  bad.warmup_start_lr = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
}

TEST_CASE("adam: zero gradients leave parameters untouched") {
  Parameter p("w", Eigen::MatrixXd::Ones(3, 2));
  AdamOptimizer adam({&p});
  p.grad.setZero();
  adam.step(0.1);
  CHECK((p.value.array() == 1.0).all());
}

TEST_CASE("adam first step moves by lr/(1+eps) against the gradient sign") {
  Parameter p("w", Eigen::MatrixXd::Zero(1, 1));
  AdamOptimizer adam({&p});
  p.grad(0, 0) = 1.0;
  adam.step(0.01);
  CHECK(p.value(0, 0) == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-12));

  // direction is -sign(g) elementwise for any nonzero gradient
  Parameter q("w", Eigen::MatrixXd::Zero(2, 2));
  AdamOptimizer adam2({&q});
  q.grad << 3.0, -0.002, 17.0, -4.0;
  adam2.step(0.5);
  CHECK(q.value(0, 0) < 0.0);
  CHECK(q.value(0, 1) > 0.0);
  CHECK(q.value(1, 0) < 0.0);
  CHECK(q.value(1, 1) > 0.0);
}

namespace {

// independent scalar Adam oracle for f(w) = w^2, written long-hand
struct ScalarAdamOracle {
  double w = 1.0, m = 0.0, v = 0.0;
  int t = 0;
  double step(double lr) {
    const double g = 2.0 * w;  // d(w^2)/dw
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.99 * v + 0.01 * g * g;
    const double m_hat = m / (1.0 - std::pow(0.9, t));
    const double v_hat = v / (1.0 - std::pow(0.99, t));
    w -= lr * m_hat / (std::sqrt(v_hat) + 1e-8);
    return w;
  }
};

}  // namespace

TEST_CASE("adam trajectory on w^2 matches the scalar oracle") {
  Parameter p("w", Eigen::MatrixXd::Ones(1, 1));
  AdamOptimizer adam({&p});
  ScalarAdamOracle oracle;
  for (int step = 0; step < 10; ++step) {
    p.grad(0, 0) = 2.0 * p.value(0, 0);
    adam.step(0.05);
    const double expected = oracle.step(0.05);
    CHECK(std::abs(p.value(0, 0) - expected) <= 1e-12);
  }
}

TEST_CASE("adam trajectories are bit-deterministic") {
  auto run = [] {
    Parameter p("w", Eigen::MatrixXd::Constant(2, 2, 0.7));
    AdamOptimizer adam({&p});
    for (int step = 0; step < 25; ++step) {
      p.grad = p.value * 0.3;
      adam.step(1e-2);
    }
    return p.value;
  };
  const Eigen::MatrixXd a = run();
  const Eigen::MatrixXd b = run();
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam rejects drifted gradient shapes") {
  Parameter p("w", Eigen::MatrixXd::Zero(2, 2));
  AdamOptimizer adam({&p});
  p.grad = Eigen::MatrixXd::Zero(3, 2);
  CHECK_THROWS_AS(adam.step(0.1), ShapeMismatch);
}

TEST_CASE("adam uses the stated defaults") {
  Parameter p("w", Eigen::MatrixXd::Zero(1, 1));
  AdamOptimizer adam({&p});
  CHECK(adam.beta1() == 0.9);
  CHECK(adam.beta2() == 0.99);
  CHECK(adam.epsilon() == 1e-8);
}
