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
#include <random>

#include "gradcheck.hpp"
#include "sphereml/loss.hpp"
#include "sphereml/manifold.hpp"

using namespace sphereml;

namespace {

SphereHead make_sphere(int classes, int dim, double scale, bool bias,
                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return SphereHead(classes, dim, scale, bias, rng);
}

SoftmaxHead make_softmax(int classes, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return SoftmaxHead(classes, dim, rng);
}

// mean cross-entropy evaluated with long-double log-sum-exp
long double extended_precision_loss(const Eigen::MatrixXd& logits,
                                    const std::vector<int>& labels) {
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    long double zmax = logits.row(i).maxCoeff();
    long double sum = 0.0L;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      sum += expl(static_cast<long double>(logits(i, j)) - zmax);
    }
    total += zmax + logl(sum) - static_cast<long double>(logits(i, labels[i]));
  }
  return total / logits.rows();
}

}  // namespace

TEST_CASE("sphere_logits: aligned and orthogonal centers at s=14") {
  SphereHead head = make_sphere(2, 3, 14.0, false, 1);
  head.weight().value.row(0) << 2.5, 0.0, 0.0;   // class 0 center along e1
  head.weight().value.row(1) << 0.0, -0.3, 0.0;  // class 1 center along -e2
  Eigen::MatrixXd x(1, 3);
  x << 7.0, 0.0, 0.0;  // aligned with class 0, orthogonal to class 1
  Eigen::MatrixXd z = head.logits(x);
  CHECK(std::abs(z(0, 0) - 14.0) <= 1e-12);
  CHECK(std::abs(z(0, 1)) <= 1e-12);
}

TEST_CASE("sphere_logits are invariant to positive rescaling") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> scale_dist(1e-2, 1e2);
  SphereHead head = make_sphere(5, 8, 14.0, true, 3);
  head.bias()->value = gradcheck::random_matrix(5, 1, rng);

  Eigen::MatrixXd x = gradcheck::random_matrix(6, 8, rng);
  const Eigen::MatrixXd z = head.logits(x);

  Eigen::MatrixXd x_scaled = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x_scaled.row(i) *= scale_dist(rng);
  }
  SphereHead scaled = make_sphere(5, 8, 14.0, true, 3);
  scaled.bias()->value = head.bias()->value;
  scaled.weight().value = head.weight().value;
  for (Eigen::Index j = 0; j < 5; ++j) {
    scaled.weight().value.row(j) *= scale_dist(rng);
  }
  const Eigen::MatrixXd z2 = scaled.logits(x_scaled);
  CHECK((z - z2).cwiseAbs().maxCoeff() <= 1e-12);

  // classification is norm-blind too
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    CHECK(head.classify_by_angle(x.row(i).transpose()) ==
          scaled.classify_by_angle(x_scaled.row(i).transpose()));
  }
}

TEST_CASE("sphere_logits equal the per-pair normalize-then-dot oracle") {
  std::mt19937_64 rng(4);
  SphereHead head = make_sphere(7, 10, 14.0, true, 5);
  head.bias()->value = gradcheck::random_matrix(7, 1, rng);
  Eigen::MatrixXd x = gradcheck::random_matrix(9, 10, rng);
  const Eigen::MatrixXd z = head.logits(x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < 7; ++j) {
      const Eigen::VectorXd xi = x.row(i).transpose() / x.row(i).norm();
      const Eigen::VectorXd wj = head.weight().value.row(j).transpose() /
                                 head.weight().value.row(j).norm();
      const double expected = 14.0 * xi.dot(wj) + head.bias()->value(j, 0);
      CHECK(std::abs(z(i, j) - expected) <= 1e-12);
    }
  }
}

TEST_CASE("sphere loss: uniform cosines give ln C") {
  // identical weight rows make every class cosine equal for any sample
  SphereHead head = make_sphere(6, 4, 14.0, false, 6);
  for (int j = 1; j < 6; ++j) {
    head.weight().value.row(j) = head.weight().value.row(0);
  }
  std::mt19937_64 rng(7);
  LossBatch batch{gradcheck::random_matrix(5, 4, rng), {0, 1, 2, 3, 4}};
  const double loss = head.forward(batch);
  CHECK(std::abs(loss - std::log(6.0)) <= 1e-12);
}

TEST_CASE("sphere loss: aligned-orthogonal two-class case at s=14") {
  SphereHead head = make_sphere(2, 2, 14.0, false, 8);
  head.weight().value << 3.0, 0.0, 0.0, 0.5;  // orthogonal centers
  Eigen::MatrixXd x(1, 2);
  x << 0.25, 0.0;  // on the class-0 center direction
  LossBatch batch{x, {0}};
  const double loss = head.forward(batch);
  CHECK(std::abs(loss - std::log1p(std::exp(-14.0))) <= 1e-12);
  CHECK(loss == doctest::Approx(8.3152837338375422e-07).epsilon(1e-9));
}

TEST_CASE("sphere loss matches an extended-precision reference") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    SphereHead head = make_sphere(8, 6, 14.0, true, 10 + trial);
    head.bias()->value = gradcheck::random_matrix(8, 1, rng, -2.0, 2.0);
    std::uniform_int_distribution<int> label(0, 7);
    LossBatch batch;
    batch.features = gradcheck::random_matrix(12, 6, rng);
    for (int i = 0; i < 12; ++i) batch.labels.push_back(label(rng));

    const double loss = head.forward(batch);
    const long double reference =
        extended_precision_loss(head.logits(batch.features), batch.labels);
    CHECK(std::abs(loss - static_cast<double>(reference)) <= 1e-10);
  }
}

TEST_CASE("sphere loss cached probabilities are normalized") {
  std::mt19937_64 rng(11);
  SphereHead head = make_sphere(9, 5, 14.0, true, 12);
  LossBatch batch{gradcheck::random_matrix(7, 5, rng), {0, 1, 2, 3, 4, 5, 6}};
  head.forward(batch);
  const Eigen::MatrixXd& probs = head.cached_probabilities();
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    CHECK(std::abs(probs.row(i).sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("sphere loss: one-class head is exactly zero with zero gradients") {
  SphereHead head = make_sphere(1, 4, 14.0, true, 13);
  std::mt19937_64 rng(14);
  LossBatch batch{gradcheck::random_matrix(3, 4, rng), {0, 0, 0}};
  CHECK(head.forward(batch) == 0.0);
  const Eigen::MatrixXd gx = head.backward(batch);
  CHECK(gx.cwiseAbs().maxCoeff() == 0.0);
  CHECK(head.weight().grad.cwiseAbs().maxCoeff() == 0.0);
  CHECK(head.bias()->grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sphere loss: doubling a raw feature halves its gradient") {
  std::mt19937_64 rng(15);
  SphereHead head = make_sphere(4, 6, 14.0, false, 16);
  LossBatch batch{gradcheck::random_matrix(3, 6, rng), {0, 1, 2}};
  head.forward(batch);
  const Eigen::MatrixXd g1 = head.backward(batch);

  LossBatch doubled = batch;
  doubled.features.row(1) *= 2.0;
  head.weight().zero_grad();
  head.forward(doubled);
  const Eigen::MatrixXd g2 = head.backward(doubled);

  CHECK((g2.row(1) - 0.5 * g1.row(1)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((g2.row(0) - g1.row(0)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("sphere loss backward matches finite differences everywhere") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> label(0, 4);
  for (int trial = 0; trial < 15; ++trial) {
    SphereHead head = make_sphere(5, 7, 14.0, true, 18 + trial);
    head.bias()->value = gradcheck::random_matrix(5, 1, rng);
    LossBatch batch;
    batch.features = gradcheck::random_matrix(6, 7, rng);
    for (int i = 0; i < 6; ++i) batch.labels.push_back(label(rng));

    head.forward(batch);
    head.weight().zero_grad();
    head.bias()->zero_grad();
    const Eigen::MatrixXd gx = head.backward(batch);

    auto f = [&] { return head.forward(batch); };
    CHECK(gradcheck::max_rel_err(
              gx, gradcheck::numeric_gradient(f, batch.features)) <= 1e-6);
    CHECK(gradcheck::max_rel_err(
              head.weight().grad,
              gradcheck::numeric_gradient(f, head.weight().value)) <= 1e-6);
    CHECK(gradcheck::max_rel_err(
              head.bias()->grad,
              gradcheck::numeric_gradient(f, head.bias()->value)) <= 1e-6);
  }
}

TEST_CASE("sphere loss backward demands a matching forward") {
  SphereHead head = make_sphere(3, 4, 14.0, false, 19);
  std::mt19937_64 rng(20);
  LossBatch batch{gradcheck::random_matrix(2, 4, rng), {0, 1}};
  CHECK_THROWS_AS(head.backward(batch), StaleCache);
}

TEST_CASE("sphere loss rejects degenerate inputs") {
  SphereHead head = make_sphere(3, 4, 14.0, false, 21);
  LossBatch batch{Eigen::MatrixXd::Zero(2, 4), {0, 1}};
  CHECK_THROWS_AS(head.forward(batch), DegenerateNorm);

  std::mt19937_64 rng(22);
  LossBatch bad_label{gradcheck::random_matrix(1, 4, rng), {3}};
  CHECK_THROWS_AS(head.forward(bad_label), InvalidConfig);
  LossBatch empty{Eigen::MatrixXd(0, 4), {}};
  CHECK_THROWS_AS(head.forward(empty), InvalidConfig);
}

TEST_CASE("softmax loss: zero weights give ln C, large logits do not overflow") {
  SoftmaxHead head = make_softmax(5, 3, 23);
  head.weight().value.setZero();
  std::mt19937_64 rng(24);
  LossBatch batch{gradcheck::random_matrix(4, 3, rng), {0, 1, 2, 3}};
  CHECK(std::abs(head.forward(batch) - std::log(5.0)) <= 1e-12);

  SoftmaxHead big = make_softmax(2, 2, 25);
  big.weight().value << 50.0, 0.0, 0.0, 0.0;  // logits (50, 0) for x = e1
  Eigen::MatrixXd x(1, 2);
  x << 1.0, 0.0;
  LossBatch limit{x, {0}};
  const double loss = big.forward(limit);
  CHECK(std::isfinite(loss));
  CHECK(loss <= 1e-20);
  CHECK(loss >= 0.0);
}

TEST_CASE("softmax loss backward matches finite differences") {
  std::mt19937_64 rng(26);
  std::uniform_int_distribution<int> label(0, 3);
  for (int trial = 0; trial < 15; ++trial) {
    SoftmaxHead head = make_softmax(4, 5, 27 + trial);
    LossBatch batch;
    batch.features = gradcheck::random_matrix(6, 5, rng);
    for (int i = 0; i < 6; ++i) batch.labels.push_back(label(rng));

    head.forward(batch);
    head.weight().zero_grad();
    const Eigen::MatrixXd gx = head.backward(batch);

    auto f = [&] { return head.forward(batch); };
    CHECK(gradcheck::max_rel_err(
              gx, gradcheck::numeric_gradient(f, batch.features)) <= 1e-6);
    CHECK(gradcheck::max_rel_err(
              head.weight().grad,
              gradcheck::numeric_gradient(f, head.weight().value)) <= 1e-6);
  }
}

TEST_CASE("classify_by_angle: alignment, ties, and argmax agreement") {
  SphereHead head = make_sphere(3, 3, 14.0, false, 28);
  head.weight().value << 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5;
  CHECK(head.classify_by_angle(Eigen::Vector3d(5.0, 0.0, 0.0)) == 0);

  // equidistant in angle from classes 0 and 1: the lower index wins
  CHECK(head.classify_by_angle(Eigen::Vector3d(1.0, 1.0, 0.0)) == 0);

  SphereHead random_head = make_sphere(5, 6, 14.0, false, 29);
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd x = gradcheck::random_vector(6, rng);
    if (x.norm() < 0.1) continue;
    Eigen::MatrixXd xm = x.transpose();
    Eigen::Index argmax = 0;
    random_head.logits(xm).row(0).maxCoeff(&argmax);
    CHECK(random_head.classify_by_angle(x) == static_cast<int>(argmax));
  }
}

TEST_CASE("sphere logits are bounded by the scale without bias") {
  std::mt19937_64 rng(31);
  SphereHead head = make_sphere(6, 5, 14.0, false, 32);
  Eigen::MatrixXd x = gradcheck::random_matrix(20, 5, rng, -4.0, 4.0);
  const Eigen::MatrixXd z = head.logits(x);
  CHECK(z.maxCoeff() <= 14.0);
  CHECK(z.minCoeff() >= -14.0);

  // consequent lower bound on the loss
  std::uniform_int_distribution<int> label(0, 5);
  LossBatch batch{x, {}};
  for (int i = 0; i < 20; ++i) batch.labels.push_back(label(rng));
  const double loss = head.forward(batch);
  CHECK(loss >= std::log1p(5.0 * std::exp(-28.0)));
}

TEST_CASE("large bias terms do not overflow the loss") {
  // cosine logits are bounded by s, but the bias is not
  std::mt19937_64 rng(35);
  SphereHead head = make_sphere(3, 4, 14.0, true, 36);
  head.bias()->value << 700.0, -700.0, 0.0;
  LossBatch batch{gradcheck::random_matrix(4, 4, rng), {0, 1, 2, 0}};
  const double loss = head.forward(batch);
  CHECK(std::isfinite(loss));
  const Eigen::MatrixXd& probs = head.cached_probabilities();
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    CHECK(std::abs(probs.row(i).sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("softmax follows weight norm where the sphere head is blind") {
  // two centers at the same angle to the probe but different norms
  const double angle = 0.5;
  Eigen::RowVector2d dir_up(std::cos(angle), std::sin(angle));
  Eigen::RowVector2d dir_down(std::cos(angle), -std::sin(angle));

  SoftmaxHead softmax = make_softmax(2, 2, 33);
  softmax.weight().value.row(0) = 1.0 * dir_up;
  softmax.weight().value.row(1) = 3.0 * dir_down;  // same angle, larger norm
  SphereHead sphere = make_sphere(2, 2, 14.0, false, 34);
  sphere.weight().value = softmax.weight().value;

  Eigen::MatrixXd probe(1, 2);
  probe << 1.0, 0.0;

  Eigen::Index soft_pick = 0;
  softmax.logits(probe).row(0).maxCoeff(&soft_pick);
  CHECK(soft_pick == 1);  // the heavier row wins on norm alone
  CHECK(sphere.classify_by_angle(probe.row(0).transpose()) == 0);  // tie rule

  // rescaling flips the softmax decision but not the sphere one
  softmax.weight().value.row(0) *= 9.0;
  sphere.weight().value.row(0) *= 9.0;
  softmax.logits(probe).row(0).maxCoeff(&soft_pick);
  CHECK(soft_pick == 0);
  CHECK(sphere.classify_by_angle(probe.row(0).transpose()) == 0);
}
