// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_POISSON_HPP
#define ROMBAYES_POISSON_HPP

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <tuple>
#include <vector>

#include "rombayes/common.hpp"
#include "rombayes/dense.hpp"
#include "rombayes/grid.hpp"
#include "rombayes/sparse.hpp"

namespace rombayes {

// Thrown when an iterative solver fails to meet its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Cholesky factorization of a symmetric positive definite banded matrix.
// Lower band stored as l[d + j*(bw+1)] = L(j+d, j), d = 0..bw.
class BandCholesky {
 public:
  BandCholesky(const SparseMatrix& a, std::size_t bandwidth)
      : n_(a.n_rows), bw_(bandwidth), l_((bandwidth + 1) * a.n_rows, 0.0) {
    require(a.n_rows == a.n_cols, "band cholesky: matrix must be square");
    const std::size_t w = bw_ + 1;
    for (std::size_t r = 0; r < n_; ++r) {
      for (std::size_t p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) {
        const std::size_t c = a.col_idx[p];
        if (c > r) continue;  // lower triangle only
        require(r - c <= bw_, "band cholesky: entry outside bandwidth");
        l_[(r - c) + c * w] = a.vals[p];
      }
    }
    for (std::size_t j = 0; j < n_; ++j) {
      double s = l_[j * w];
      const std::size_t k0 = (j > bw_) ? j - bw_ : 0;
      for (std::size_t k = k0; k < j; ++k) {
        const double ljk = l_[(j - k) + k * w];
        s -= ljk * ljk;
      }
      if (!(s > 0.0)) throw SingularMatrixError("band cholesky: non-positive pivot at " + std::to_string(j));
      const double d = std::sqrt(s);
      l_[j * w] = d;
      const std::size_t imax = std::min(j + bw_, n_ - 1);
      for (std::size_t i = j + 1; i <= imax; ++i) {
        double t = l_[(i - j) + j * w];
        const std::size_t kk0 = (i > bw_) ? i - bw_ : 0;
        for (std::size_t k = kk0; k < j; ++k) t -= l_[(i - k) + k * w] * l_[(j - k) + k * w];
        l_[(i - j) + j * w] = t / d;
      }
    }
  }

  void solve(std::span<const double> b, std::span<double> x) const {
    const std::size_t w = bw_ + 1;
    Vector y(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = b[i];
      const std::size_t k0 = (i > bw_) ? i - bw_ : 0;
      for (std::size_t k = k0; k < i; ++k) s -= l_[(i - k) + k * w] * y[k];
      y[i] = s / l_[i * w];
    }
    for (std::size_t ii = n_; ii-- > 0;) {
      double s = y[ii];
      const std::size_t imax = std::min(ii + bw_, n_ - 1);
      for (std::size_t i = ii + 1; i <= imax; ++i) s -= l_[(i - ii) + ii * w] * x[i];
      x[ii] = s / l_[ii * w];
    }
  }

 private:
  std::size_t n_, bw_;
  std::vector<double> l_;
};

// One symmetric Gauss-Seidel sweep (forward then backward) on a x = b.
inline void sgs_sweep(const SparseMatrix& a, const Vector& diag, std::span<const double> b,
                      std::span<double> x) {
  const std::size_t n = a.n_rows;
  for (std::size_t r = 0; r < n; ++r) {
    double s = b[r];
    for (std::size_t p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) {
      const std::size_t c = a.col_idx[p];
      if (c != r) s -= a.vals[p] * x[c];
    }
    x[r] = s / diag[r];
  }
  for (std::size_t rr = n; rr-- > 0;) {
    double s = b[rr];
    for (std::size_t p = a.row_ptr[rr]; p < a.row_ptr[rr + 1]; ++p) {
      const std::size_t c = a.col_idx[p];
      if (c != rr) s -= a.vals[p] * x[c];
    }
    x[rr] = s / diag[rr];
  }
}

// Bilinear interpolation matrix from a coarse interior grid (ngc points per
// direction) to a fine one (ngf points). Grids need not be nested: weights
// come from physical coordinates, with zero Dirichlet boundaries absorbing
// out-of-range neighbors.
inline SparseMatrix bilinear_prolongation(std::size_t ngf, std::size_t ngc) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
  const double rf = static_cast<double>(ngc + 1) / static_cast<double>(ngf + 1);
  auto weights_1d = [&](std::size_t i_fine) {
    // Continuous coarse index of fine point i_fine: coarse point I sits at
    // (I+1)/(ngc+1).
    const double t = static_cast<double>(i_fine + 1) * rf - 1.0;
    const double fl = std::floor(t);
    const long i0 = static_cast<long>(fl);
    const double w = t - fl;
    std::vector<std::pair<long, double>> out;
    if (1.0 - w > 0.0) out.emplace_back(i0, 1.0 - w);
    if (w > 0.0) out.emplace_back(i0 + 1, w);
    return out;
  };
  std::vector<std::vector<std::pair<long, double>>> wx(ngf);
  for (std::size_t i = 0; i < ngf; ++i) wx[i] = weights_1d(i);
  for (std::size_t j = 0; j < ngf; ++j) {
    for (std::size_t i = 0; i < ngf; ++i) {
      const std::size_t row = j * ngf + i;
      for (const auto& [jc, wj] : wx[j]) {
        if (jc < 0 || jc >= static_cast<long>(ngc)) continue;
        for (const auto& [ic, wi] : wx[i]) {
          if (ic < 0 || ic >= static_cast<long>(ngc)) continue;
          trips.emplace_back(row, static_cast<std::size_t>(jc) * ngc + static_cast<std::size_t>(ic),
                             wi * wj);
        }
      }
    }
  }
  return SparseMatrix::from_triplets(ngf * ngf, ngc * ngc, std::move(trips));
}

}  // namespace detail

// Solver for systems with the discrete Laplacian, used both standalone and as
// the preconditioning operator of the residual formulations.
//
// Variants:
//  - direct: banded Cholesky factorization (bandwidth n_g), backward-stable
//    solves at machine precision up to conditioning.
//  - multigrid: geometric hierarchy (factor-2 coarsening by physical position,
//    bilinear interpolation, Galerkin coarse operators, symmetric Gauss-Seidel
//    1 pre / 1 post sweep, coarsest grid n_g <= 3 solved directly). apply()
//    runs CG with one V-cycle as preconditioner to a relative residual of
//    cg_tol (default 1e-6).
class PoissonSolver {
 public:
  enum class Variant { direct, multigrid };

  PoissonSolver(const Grid& grid, const SparseMatrix& a, Variant variant, double cg_tol = 1e-6)
      : n_(a.n_rows), variant_(variant), cg_tol_(cg_tol) {
    require(a.n_rows == a.n_cols && a.n_rows == grid.size(), "poisson: shape mismatch");
    if (variant_ == Variant::direct) {
      direct_ = std::make_shared<detail::BandCholesky>(a, grid.n_g);
      return;
    }
    std::size_t ng = grid.n_g;
    levels_.push_back(Level{a, a.diagonal(), {}, {}});
    while (ng > 3 && ng / 2 >= 1 && ng / 2 < ng) {
      const std::size_t ngc = ng / 2;
      SparseMatrix p = detail::bilinear_prolongation(ng, ngc);
      SparseMatrix pt = csr_transpose(p);
      SparseMatrix ac = csr_matmul(pt, csr_matmul(levels_.back().a, p));
      levels_.back().p = std::move(p);
      levels_.back().pt = std::move(pt);
      levels_.push_back(Level{std::move(ac), {}, {}, {}});
      levels_.back().diag = levels_.back().a.diagonal();
      ng = ngc;
    }
    coarse_lu_ = std::make_shared<LuFactorization>(levels_.back().a.to_dense());
  }

  std::size_t dimension() const { return n_; }
  Variant variant() const { return variant_; }
  std::size_t num_levels() const { return levels_.size(); }
  int last_iterations() const { return last_iterations_; }

  // One V-cycle for the fine-grid system, improving x in place (multigrid only).
  void vcycle(std::span<const double> b, std::span<double> x) const {
    require(variant_ == Variant::multigrid, "vcycle: multigrid variant only");
    vcycle_level(0, b, x);
  }

  // Solves A x = b. Direct variant: one factorized solve. Multigrid variant:
  // V-cycle-preconditioned CG to relative residual cg_tol; ConvergenceError if
  // the tolerance is not met within the iteration cap.
  void apply(std::span<const double> b, std::span<double> x) const {
    require(b.size() == n_ && x.size() == n_, "poisson apply: shape mismatch");
    if (variant_ == Variant::direct) {
      direct_->solve(b, x);
      last_iterations_ = 0;
      return;
    }
    const double nb = norm2(b);
    std::fill(x.begin(), x.end(), 0.0);
    if (nb == 0.0) {
      last_iterations_ = 0;
      return;
    }
    const SparseMatrix& a = levels_[0].a;
    Vector r(b.begin(), b.end());
    Vector z(n_, 0.0), p(n_), q(n_);
    vcycle_level(0, r, z);
    p = z;
    double rz = dot(r, z);
    constexpr int kMaxIt = 200;
    for (int it = 1; it <= kMaxIt; ++it) {
      spmv(a, p, q);
      const double alpha = rz / dot(p, q);
      axpy(alpha, p, x);
      axpy(-alpha, q, r);
      if (norm2(r) <= cg_tol_ * nb) {
        last_iterations_ = it;
        return;
      }
      std::fill(z.begin(), z.end(), 0.0);
      vcycle_level(0, r, z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      for (std::size_t i = 0; i < n_; ++i) p[i] = z[i] + beta * p[i];
      rz = rz_new;
    }
    throw ConvergenceError("poisson multigrid CG: tolerance not met, relative residual " +
                           std::to_string(norm2(r) / nb));
  }

  Vector apply(const Vector& b) const {
    Vector x(n_);
    apply(std::span<const double>(b), std::span<double>(x));
    return x;
  }

 private:
  struct Level {
    SparseMatrix a;
    Vector diag;
    SparseMatrix p;   // prolongation to this level from the next-coarser one
    SparseMatrix pt;  // its transpose (restriction)
  };

  void vcycle_level(std::size_t l, std::span<const double> b, std::span<double> x) const {
    const Level& lev = levels_[l];
    if (l + 1 == levels_.size()) {
      coarse_lu_->solve(b, x);
      return;
    }
    detail::sgs_sweep(lev.a, lev.diag, b, x);
    Vector r(lev.a.n_rows);
    spmv(lev.a, x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    Vector rc(lev.pt.n_rows);
    spmv(lev.pt, r, rc);
    Vector ec(lev.pt.n_rows, 0.0);
    vcycle_level(l + 1, rc, ec);
    Vector corr(lev.a.n_rows);
    spmv(lev.p, ec, corr);
    axpy(1.0, corr, x);
    detail::sgs_sweep(lev.a, lev.diag, b, x);
  }

  std::size_t n_;
  Variant variant_;
  double cg_tol_;
  std::shared_ptr<detail::BandCholesky> direct_;
  std::vector<Level> levels_;
  std::shared_ptr<LuFactorization> coarse_lu_;
  mutable int last_iterations_ = 0;
};

}  // namespace rombayes

#endif  // ROMBAYES_POISSON_HPP
