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

#ifndef SPHEREML_MANIFOLD_HPP_
#define SPHEREML_MANIFOLD_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "sphereml/errors.hpp"

// Vector math on the unit hypersphere. Free functions accept arbitrary
// Eigen expressions; everything is evaluated in the expression's scalar
// type (double throughout this library).

namespace sphereml {

/// Norms at or below this floor have no numerically meaningful direction.
inline constexpr double kNormFloor = 1e-12;

/// Unit-norm tolerance accepted for embeddings.
inline constexpr double kUnitNormTol = 1e-9;

template <typename Derived>
using PlainVector =
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;

/// v / ||v||. Throws DegenerateNorm when ||v|| <= kNormFloor. A non-finite
/// norm (overflowed or NaN input) propagates NaN instead of throwing, so a
/// numerically exploding computation surfaces as a non-finite result
/// rather than a missing-direction error.
template <typename Derived>
PlainVector<Derived> l2_normalize(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const auto n = v.norm();
  if (!std::isfinite(n)) {
    return PlainVector<Derived>::Constant(
        v.size(), std::numeric_limits<Scalar>::quiet_NaN());
  }
  if (n <= kNormFloor) {
    throw DegenerateNorm("cannot normalize vector with norm <= 1e-12");
  }
  return v / n;
}

/// Pullback of an upstream gradient through l2_normalize:
///   J^T g = (g - x (x . g)) / ||v||   with x = v / ||v||.
/// The result lies in the tangent space at x.
template <typename DerivedV, typename DerivedG>
PlainVector<DerivedV> l2_normalize_backward(
    const Eigen::MatrixBase<DerivedV>& v,
    const Eigen::MatrixBase<DerivedG>& upstream) {
  if (v.size() != upstream.size()) {
    throw DimensionMismatch("l2_normalize_backward: size mismatch");
  }
  using Scalar = typename DerivedV::Scalar;
  const auto n = v.norm();
  if (!std::isfinite(n)) {
    return PlainVector<DerivedV>::Constant(
        v.size(), std::numeric_limits<Scalar>::quiet_NaN());
  }
  if (n <= kNormFloor) {
    throw DegenerateNorm("cannot normalize vector with norm <= 1e-12");
  }
  PlainVector<DerivedV> x = v / n;
  const auto radial = x.dot(upstream);
  return (upstream - radial * x) / n;
}

/// Dot product of two unit vectors, clamped to [-1, 1] so rounding drift
/// can never push downstream acos/softmax past the poles.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(
    const Eigen::MatrixBase<DerivedA>& a,
    const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine_similarity: size mismatch");
  }
  using Scalar = typename DerivedA::Scalar;
  return std::clamp<Scalar>(a.dot(b), Scalar(-1), Scalar(1));
}

/// Chord length between two points of the unit sphere,
///   ||a - b|| = sqrt(2 - 2 cos(theta)).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sphere_euclidean(
    const Eigen::MatrixBase<DerivedA>& a,
    const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar c = cosine_similarity(a, b);
  return std::sqrt(std::max<Scalar>(Scalar(0), Scalar(2) - Scalar(2) * c));
}

/// Row-wise l2_normalize over a batch (rows are samples).
inline Eigen::MatrixXd l2_normalize_rows(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.row(i) = l2_normalize(x.row(i).transpose()).transpose();
  }
  return out;
}

/// Raw activation vector: finite entries, dimension >= 1.
class FeatureVector {
 public:
  explicit FeatureVector(Eigen::VectorXd values) : values_(std::move(values)) {
    if (values_.size() < 1) {
      throw InvalidConfig("FeatureVector requires dimension >= 1");
    }
    if (!values_.allFinite()) {
      throw InvalidConfig("FeatureVector entries must be finite");
    }
  }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::Index dim() const { return values_.size(); }

 private:
  Eigen::VectorXd values_;
};

/// Point on the unit hypersphere; |norm - 1| <= 1e-9 enforced at construction.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(Eigen::VectorXd values)
      : values_(std::move(values)) {
    if (values_.size() < 1) {
      throw InvalidConfig("EmbeddingVector requires dimension >= 1");
    }
    if (!values_.allFinite() || std::abs(values_.norm() - 1.0) > kUnitNormTol) {
      throw DegenerateNorm("EmbeddingVector must have unit norm");
    }
  }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::Index dim() const { return values_.size(); }

 private:
  Eigen::VectorXd values_;
};

inline EmbeddingVector l2_normalize(const FeatureVector& v) {
  return EmbeddingVector(l2_normalize(v.values()));
}

inline double cosine_similarity(const EmbeddingVector& a,
                                const EmbeddingVector& b) {
  return cosine_similarity(a.values(), b.values());
}

inline double sphere_euclidean(const EmbeddingVector& a,
                               const EmbeddingVector& b) {
  return sphere_euclidean(a.values(), b.values());
}

}  // namespace sphereml

#endif  // SPHEREML_MANIFOLD_HPP_
