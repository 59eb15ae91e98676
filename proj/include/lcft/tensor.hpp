#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "lcft/errors.hpp"

namespace lcft {

using Index = Eigen::Index;

// Dense row-major storage for every parameter array and activation. Row-major
// keeps an embedding row contiguous, which is what sparse updates touch.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;
using Vector = VectorX<double>;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, std::string_view what) {
  if (!m.allFinite()) {
    throw DomainError(std::string(what) + ": non-finite value");
  }
}

inline void require_finite(double x, std::string_view what) {
  if (!std::isfinite(x)) {
    throw DomainError(std::string(what) + ": non-finite value");
  }
}

// Ordered left-to-right sum. Used wherever a reduction feeds a reported number
// so results do not depend on vectorization width.
template <typename Range>
double ordered_sum(const Range& values) {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

}  // namespace lcft
