#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>

#include "locenc/error.hpp"

namespace locenc {

/// Dense row-major matrix of doubles. Every operation in this library checks
/// shapes explicitly; nothing broadcasts implicitly.
using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline void require_shape(const Tensor2& t, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (t.rows() != rows || t.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", got " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
  }
}

inline bool all_finite(const Tensor2& t) { return t.allFinite(); }

inline std::string shape_str(const Tensor2& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

/// Computes x * w + b (b is 1 x cols(w)) so that every output row depends
/// only on its own input row through an identical sequence of operations.
/// Identical input rows therefore give bit-identical outputs, which a blocked
/// GEMM does not guarantee.
inline Tensor2 affine_rows(const Tensor2& x, const Tensor2& w, const Tensor2& b) {
  require_shape(b, 1, w.cols(), "affine_rows bias");
  if (x.cols() != w.rows()) throw ShapeError("affine_rows: " + shape_str(x) + " times " + shape_str(w));
  Tensor2 y(x.rows(), w.cols());
  constexpr Eigen::Index kBlock = 8;
  for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += kBlock) {
    const Eigen::Index r1 = std::min<Eigen::Index>(x.rows(), r0 + kBlock);
    for (Eigen::Index i = r0; i < r1; ++i) y.row(i) = b.row(0);
    for (Eigen::Index k = 0; k < w.rows(); ++k) {
      const auto wk = w.row(k);
      for (Eigen::Index i = r0; i < r1; ++i) y.row(i).noalias() += x(i, k) * wk;
    }
  }
  return y;
}

}  // namespace locenc
