// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_DENSE_HPP
#define ROMBAYES_DENSE_HPP

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rombayes/common.hpp"

namespace rombayes {

// Dense matrix, column-major storage (column j is contiguous).
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return a_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[j * rows_ + i]; }

  std::span<double> col(std::size_t j) { return {a_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const { return {a_.data() + j * rows_, rows_}; }

  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  double max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

// y = A x
inline void matvec(const DenseMatrix& a, std::span<const double> x, std::span<double> y) {
  require(x.size() == a.cols() && y.size() == a.rows(), "matvec: shape mismatch");
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j) axpy(x[j], a.col(j), y);
}

// y = A^T x
inline void matvec_t(const DenseMatrix& a, std::span<const double> x, std::span<double> y) {
  require(x.size() == a.rows() && y.size() == a.cols(), "matvec_t: shape mismatch");
  for (std::size_t j = 0; j < a.cols(); ++j) y[j] = dot(a.col(j), x);
}

// C = A B
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul: shape mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto cj = c.col(j);
    for (std::size_t l = 0; l < a.cols(); ++l) axpy(b(l, j), a.col(l), cj);
  }
  return c;
}

// C = A^T B
inline DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows(), "matmul_at_b: shape mismatch");
  DenseMatrix c(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = 0; i < a.cols(); ++i) c(i, j) = dot(a.col(i), b.col(j));
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) t(j, i) = a(i, j);
  return t;
}

// LU factorization with partial pivoting of a square matrix.
// A pivot of magnitude <= pivot_rtol * max|K| raises SingularMatrixError.
class LuFactorization {
 public:
  explicit LuFactorization(DenseMatrix k, double pivot_rtol = 1e-14)
      : lu_(std::move(k)), piv_(lu_.rows()) {
    require(lu_.rows() == lu_.cols(), "lu: matrix must be square");
    const std::size_t n = lu_.rows();
    const double tol = pivot_rtol * lu_.max_abs();
    for (std::size_t i = 0; i < n; ++i) piv_[i] = i;
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t p = j;
      double best = std::abs(lu_(j, j));
      for (std::size_t i = j + 1; i < n; ++i) {
        const double v = std::abs(lu_(i, j));
        if (v > best) {
          best = v;
          p = i;
        }
      }
      if (best <= tol) throw SingularMatrixError("lu: pivot below tolerance at column " + std::to_string(j));
      if (p != j) {
        std::swap(piv_[p], piv_[j]);
        for (std::size_t c = 0; c < n; ++c) std::swap(lu_(p, c), lu_(j, c));
      }
      const double d = lu_(j, j);
      for (std::size_t i = j + 1; i < n; ++i) {
        const double m = lu_(i, j) / d;
        lu_(i, j) = m;
        if (m != 0.0) {
          for (std::size_t c = j + 1; c < n; ++c) lu_(i, c) -= m * lu_(j, c);
        }
      }
    }
  }

  std::size_t dim() const { return lu_.rows(); }

  // Solves K x = b.
  void solve(std::span<const double> b, std::span<double> x) const {
    const std::size_t n = dim();
    require(b.size() == n && x.size() == n, "lu solve: shape mismatch");
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = b[piv_[i]];
    for (std::size_t i = 1; i < n; ++i) {
      double s = y[i];
      for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * y[j];
      y[i] = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(ii, j) * x[j];
      x[ii] = s / lu_(ii, ii);
    }
  }

  Vector solve(const Vector& b) const {
    Vector x(dim());
    solve(std::span<const double>(b), std::span<double>(x));
    return x;
  }

  // Explicit inverse (small systems only).
  DenseMatrix inverse() const {
    const std::size_t n = dim();
    DenseMatrix inv(n, n);
    Vector e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      e.assign(n, 0.0);
      e[j] = 1.0;
      solve(e, inv.col(j));
    }
    return inv;
  }

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> piv_;
};

// One-shot solve of K x = rhs.
inline Vector dense_solve(const DenseMatrix& k, const Vector& rhs) {
  return LuFactorization(k).solve(rhs);
}

}  // namespace rombayes

#endif  // ROMBAYES_DENSE_HPP
