#pragma once

// Dense numeric kernel shared by every other module.
//
// Kernels that feed the forward pass (matmul, matvec) accumulate each output
// element in ascending inner index starting from zero, so results match a
// naive triple loop bit-for-bit. Build with -ffp-contract=off to keep that.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>

#include "pgen/error.hpp"
#include "pgen/rng.hpp"

namespace pgen {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "matmul: " + shape_string(a.rows(), a.cols()) + " times " +
                    shape_string(b.rows(), b.cols()));
  }
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(a.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const Scalar bkj = b(k, j);
      out.col(j).array() += a.col(k).array() * bkj;
    }
  }
  return out;
}

/// y = A x with the same per-element summation order as `matmul`.
template <typename DerivedA, typename DerivedX>
VectorX<typename DerivedA::Scalar> matvec(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedX>& x) {
  using Scalar = typename DerivedA::Scalar;
  if (a.cols() != x.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "matvec: " + shape_string(a.rows(), a.cols()) + " times vector of " +
                    std::to_string(x.size()));
  }
  VectorX<Scalar> y = VectorX<Scalar>::Zero(a.rows());
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const Scalar xk = x(k);
    y.array() += a.col(k).array() * xk;
  }
  return y;
}

template <std::floating_point Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <std::floating_point Scalar>
Scalar relu(Scalar x) {
  return x > Scalar(0) ? x : Scalar(0);
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return m.unaryExpr([](Scalar v) { return sigmoid(v); });
}

template <typename Derived>
auto tanh(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return m.unaryExpr([](Scalar v) { return std::tanh(v); });
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return m.unaryExpr([](Scalar v) { return relu(v); });
}

/// Max-subtracted softmax. Normalization sums in ascending index order.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw Error(ErrorCode::kInvalidArgument, "softmax of empty vector");
  const Scalar top = v.maxCoeff();
  VectorX<Scalar> p(v.size());
  Scalar total = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    p(i) = std::exp(v(i) - top);
    total += p(i);
  }
  return p / total;
}

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Inverse-CDF draw over cumulative sums in index order.
template <typename Derived>
Eigen::Index sample_categorical(const Eigen::MatrixBase<Derived>& p, Rng& rng) {
  using Scalar = typename Derived::Scalar;
  if (p.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty distribution");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p(i) >= Scalar(0))) {
      throw Error(ErrorCode::kInvalidArgument,
                  "negative probability at index " + std::to_string(i));
    }
    total += p(i);
  }
  if (std::abs(total - Scalar(1)) > Scalar(1e-9)) {
    throw Error(ErrorCode::kInvalidArgument, "distribution not normalized");
  }
  const Scalar u = static_cast<Scalar>(rng.uniform());
  Scalar cumulative = 0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > Scalar(0)) last_positive = i;
    cumulative += p(i);
    if (u < cumulative && p(i) > Scalar(0)) return i;
  }
  // Rounding can leave the cumulative sum just under u.
  return last_positive;
}

}  // namespace pgen
