// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_ROM_HPP
#define ROMBAYES_ROM_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rombayes/common.hpp"
#include "rombayes/dense.hpp"
#include "rombayes/model.hpp"
#include "rombayes/newton.hpp"
#include "rombayes/poisson.hpp"
#include "rombayes/rng.hpp"
#include "rombayes/svd.hpp"

namespace rombayes {

// Largest r with sigma_r-1 above the numerical-rank cutoff.
inline std::size_t numerical_rank(const Vector& sigma, std::size_t rows, std::size_t cols) {
  if (sigma.empty() || sigma[0] <= 0.0) return 0;
  const double cutoff =
      static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * sigma[0];
  std::size_t r = 0;
  while (r < sigma.size() && sigma[r] > cutoff) ++r;
  return r;
}

// Orthonormal basis of the leading left singular subspace of a snapshot
// matrix. sigma keeps the full spectrum for diagnostics.
struct PodBasis {
  DenseMatrix q;  // rows x k, orthonormal columns
  Vector sigma;   // all singular values, descending
};

inline PodBasis pod_basis(const DenseMatrix& snapshots, std::size_t k) {
  require(k >= 1 && k <= snapshots.cols(), "pod_basis: k out of range");
  ThinSvd svd = thin_svd(snapshots);
  const std::size_t rank = numerical_rank(svd.sigma, snapshots.rows(), snapshots.cols());
  if (k > rank)
    throw std::invalid_argument("pod_basis: k = " + std::to_string(k) +
                                " exceeds numerical rank " + std::to_string(rank));
  PodBasis out;
  out.sigma = std::move(svd.sigma);
  out.q = DenseMatrix(snapshots.rows(), k);
  for (std::size_t j = 0; j < k; ++j)
    std::copy(svd.u.col(j).begin(), svd.u.col(j).end(), out.q.col(j).begin());
  return out;
}

// Greedy interpolation indices: the first index is the largest-magnitude entry
// of the first column; each later column is interpolated at the chosen indices
// and the new index is the largest-magnitude entry of its residual. Ties take
// the lowest index. The (P^T V) inverse is grown by bordered updates; the
// Schur complement equals the selected residual entry, so a zero residual
// means dependent columns.
inline std::vector<std::size_t> deim_points(const DenseMatrix& v) {
  const std::size_t rows = v.rows(), n = v.cols();
  require(n >= 1 && rows >= n, "deim_points: need a tall nonempty matrix");
  auto argmax_abs = [rows](std::span<const double> x) {
    std::size_t best = 0;
    double bv = std::abs(x[0]);
    for (std::size_t i = 1; i < rows; ++i) {
      const double a = std::abs(x[i]);
      if (a > bv) {
        bv = a;
        best = i;
      }
    }
    return std::pair<std::size_t, double>{best, bv};
  };

  std::vector<std::size_t> p;
  p.reserve(n);
  const auto [p0, v0] = argmax_abs(v.col(0));
  if (v0 == 0.0) throw SingularMatrixError("deim_points: first column is zero");
  p.push_back(p0);
  DenseMatrix minv(1, 1);
  minv(0, 0) = 1.0 / v(p0, 0);

  Vector c, w, r(rows);
  for (std::size_t i = 1; i < n; ++i) {
    // c = (P^T V)^{-1} P^T v_i
    Vector rhs(i);
    for (std::size_t a = 0; a < i; ++a) rhs[a] = v(p[a], i);
    c.assign(i, 0.0);
    matvec(minv, rhs, c);
    for (std::size_t row = 0; row < rows; ++row) r[row] = v(row, i);
    for (std::size_t a = 0; a < i; ++a) axpy(-c[a], v.col(a), std::span<double>(r));
    const auto [pi, rmax] = argmax_abs(r);
    if (rmax == 0.0) throw SingularMatrixError("deim_points: dependent columns at index " + std::to_string(i));
    p.push_back(pi);

    // Border (P^T V)^{-1} with the new row/column. Row: old columns at the new
    // index; Schur complement s = r[pi].
    Vector crow(i);
    for (std::size_t b = 0; b < i; ++b) crow[b] = v(pi, b);
    w.assign(i, 0.0);
    matvec_t(minv, crow, w);  // w^T = crow^T * minv
    const double s = r[pi];
    DenseMatrix grown(i + 1, i + 1);
    for (std::size_t bcol = 0; bcol < i; ++bcol)
      for (std::size_t arow = 0; arow < i; ++arow)
        grown(arow, bcol) = minv(arow, bcol) + c[arow] * w[bcol] / s;
    for (std::size_t arow = 0; arow < i; ++arow) grown(arow, i) = -c[arow] / s;
    for (std::size_t bcol = 0; bcol < i; ++bcol) grown(i, bcol) = -w[bcol] / s;
    grown(i, i) = 1.0 / s;
    minv = std::move(grown);
  }
  return p;
}

// Interpolation operator F_bar = V (P^T V)^{-1} P^T F.
struct DeimInterpolant {
  DenseMatrix v;               // rows x n, orthonormal columns
  std::vector<std::size_t> p;  // n interpolation indices, 0-based
  DenseMatrix ptv_inv;         // (P^T V)^{-1}, n x n
};

inline DeimInterpolant make_interpolant(DenseMatrix v) {
  DeimInterpolant d;
  d.p = deim_points(v);
  const std::size_t n = v.cols();
  DenseMatrix ptv(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) ptv(i, j) = v(d.p[i], j);
  d.ptv_inv = LuFactorization(ptv).inverse();
  d.v = std::move(v);
  return d;
}

// Interpolation basis from nonlinear-term snapshots: leading left singular
// vectors of s_f, then greedy indices.
inline DeimInterpolant deim_interpolant(const DenseMatrix& s_f, std::size_t n) {
  PodBasis pb = pod_basis(s_f, n);
  return make_interpolant(std::move(pb.q));
}

// Full-space interpolation of f (testing and diagnostics; the reduced solves
// never form this).
inline Vector deim_apply(const DeimInterpolant& d, std::span<const double> f) {
  const std::size_t n = d.p.size();
  require(f.size() == d.v.rows(), "deim_apply: shape mismatch");
  Vector fp(n), c(n);
  for (std::size_t i = 0; i < n; ++i) fp[i] = f[d.p[i]];
  matvec(d.ptv_inv, fp, c);
  Vector out(d.v.rows(), 0.0);
  for (std::size_t j = 0; j < n; ++j) axpy(c[j], d.v.col(j), std::span<double>(out));
  return out;
}

// Precomputed reduced operators. Unpreconditioned residual:
//   A_r u_r + E f(Q_P u_r) + B_r,            E   = Q^T V (P^T V)^{-1}
// Preconditioned residual (needs build with a Poisson solver):
//   u_r + E_M f(Q_P u_r) + MB_r,             E_M = Q^T M V (P^T V)^{-1}
// Q_P = P^T Q gathers the sampled rows, so the nonlinearity is evaluated at n
// points only.
struct ReducedSystem {
  std::size_t full_dim = 0;
  DenseMatrix q;    // N x k
  DenseMatrix a_r;  // k x k
  Vector b_r;       // k
  DenseMatrix e;    // k x n
  DenseMatrix q_p;  // n x k
  std::vector<std::size_t> p;
  DenseMatrix e_m;  // k x n (empty unless preconditioned build)
  Vector mb_r;      // k
  bool has_precond = false;

  std::size_t k() const { return a_r.rows(); }
  std::size_t n() const { return p.size(); }
};

inline ReducedSystem build_reduced_system(const FullModel& m, const PodBasis& pod,
                                          const DeimInterpolant& interp,
                                          const PoissonSolver* minv = nullptr) {
  const std::size_t big_n = m.size();
  require(pod.q.rows() == big_n && interp.v.rows() == big_n, "build_reduced_system: shape mismatch");
  const std::size_t k = pod.q.cols(), n = interp.v.cols();

  ReducedSystem r;
  r.full_dim = big_n;
  r.q = pod.q;
  r.p = interp.p;

  DenseMatrix aq(big_n, k);
  for (std::size_t j = 0; j < k; ++j) spmv(m.a, r.q.col(j), aq.col(j));
  r.a_r = matmul_at_b(r.q, aq);

  r.b_r.assign(k, 0.0);
  matvec_t(r.q, m.b, r.b_r);

  DenseMatrix w = matmul(interp.v, interp.ptv_inv);  // N x n
  r.e = matmul_at_b(r.q, w);

  r.q_p = DenseMatrix(n, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < n; ++i) r.q_p(i, j) = r.q(r.p[i], j);

  if (minv != nullptr) {
    require(minv->dimension() == big_n, "build_reduced_system: preconditioner dimension mismatch");
    DenseMatrix mw(big_n, n);
    for (std::size_t j = 0; j < n; ++j) minv->apply(w.col(j), mw.col(j));
    r.e_m = matmul_at_b(r.q, mw);
    Vector mb = minv->apply(m.b);
    r.mb_r.assign(k, 0.0);
    matvec_t(r.q, mb, r.mb_r);
    r.has_precond = true;
  }
  return r;
}

inline void reduced_residual(const ReducedSystem& r, std::span<const double> u_r,
                             const Parameter& p, std::span<double> out) {
  const std::size_t k = r.k(), n = r.n();
  require(u_r.size() == k && out.size() == k, "reduced_residual: shape mismatch");
  Vector t(n), fp(n);
  matvec(r.q_p, u_r, t);
  eval_reaction(t, p, fp);
  matvec(r.a_r, u_r, out);
  for (std::size_t j = 0; j < n; ++j) axpy(fp[j], r.e.col(j), out);
  axpy(1.0, r.b_r, out);
}

// J = A_r + E diag(xi2 exp(xi1 Q_P u_r)) Q_P
inline void reduced_jacobian(const ReducedSystem& r, std::span<const double> u_r,
                             const Parameter& p, DenseMatrix& out) {
  const std::size_t k = r.k(), n = r.n();
  Vector t(n), d(n);
  matvec(r.q_p, u_r, t);
  eval_reaction_jacobian(t, p, d);
  out = r.a_r;
  for (std::size_t j = 0; j < n; ++j) {
    const double dj = d[j];
    if (dj == 0.0) continue;
    for (std::size_t col = 0; col < k; ++col) {
      const double w = dj * r.q_p(j, col);
      if (w != 0.0) axpy(w, r.e.col(j), out.col(col));
    }
  }
}

// Relative full-space residual of the lifted reduced solution:
// ||G(Q u_r; xi)|| / ||B||. Since G(0) = B this is also the residual reduction
// a full solve from zero would be measured by.
inline double error_indicator(const FullModel& m, const ReducedSystem& r,
                              std::span<const double> u_r, const Parameter& p) {
  Vector lifted(m.size(), 0.0);
  for (std::size_t j = 0; j < r.k(); ++j) axpy(u_r[j], r.q.col(j), std::span<double>(lifted));
  Vector g(m.size());
  m.residual(lifted, p, g);
  return norm2(g) / m.norm_b;
}

// Reduced-model adapter for the Newton driver. With preconditioned = true the
// residual is the preconditioned form (requires a preconditioned build).
class DeimSystem {
 public:
  DeimSystem(const ReducedSystem& r, const Parameter& p, bool preconditioned)
      : r_(r), p_(p), precond_(preconditioned) {
    if (precond_) require(r.has_precond, "DeimSystem: reduced system lacks preconditioned operators");
  }

  std::size_t dimension() const { return r_.k(); }

  void residual(std::span<const double> u_r, std::span<double> out) const {
    ++fe_;
    const std::size_t n = r_.n();
    Vector t(n), fp(n);
    matvec(r_.q_p, u_r, t);
    eval_reaction(t, p_, fp);
    if (precond_) {
      std::copy(u_r.begin(), u_r.end(), out.begin());
      axpy(1.0, r_.mb_r, out);
      for (std::size_t j = 0; j < n; ++j) axpy(fp[j], r_.e_m.col(j), out);
    } else {
      matvec(r_.a_r, u_r, out);
      axpy(1.0, r_.b_r, out);
      for (std::size_t j = 0; j < n; ++j) axpy(fp[j], r_.e.col(j), out);
    }
  }

  void apply_jacobian(std::span<const double> u_r, std::span<const double> v,
                      std::span<double> out) const {
    const std::size_t n = r_.n();
    Vector t(n), d(n), tv(n);
    matvec(r_.q_p, u_r, t);
    eval_reaction_jacobian(t, p_, d);
    matvec(r_.q_p, v, tv);
    const DenseMatrix& em = precond_ ? r_.e_m : r_.e;
    if (precond_) {
      std::copy(v.begin(), v.end(), out.begin());
    } else {
      matvec(r_.a_r, v, out);
    }
    for (std::size_t j = 0; j < n; ++j) axpy(d[j] * tv[j], em.col(j), out);
  }

  void dense_jacobian(std::span<const double> u_r, DenseMatrix& out) const {
    const std::size_t k = r_.k(), n = r_.n();
    Vector t(n), d(n);
    matvec(r_.q_p, u_r, t);
    eval_reaction_jacobian(t, p_, d);
    const DenseMatrix& em = precond_ ? r_.e_m : r_.e;
    out = precond_ ? DenseMatrix::identity(k) : r_.a_r;
    for (std::size_t j = 0; j < n; ++j) {
      const double dj = d[j];
      if (dj == 0.0) continue;
      for (std::size_t col = 0; col < k; ++col) {
        const double w = dj * r_.q_p(j, col);
        if (w != 0.0) axpy(w, em.col(j), out.col(col));
      }
    }
  }

  std::uint64_t function_evaluations() const { return fe_; }
  void reset_function_evaluations() const { fe_ = 0; }

 private:
  const ReducedSystem& r_;
  Parameter p_;
  bool precond_;
  mutable std::uint64_t fe_ = 0;
};

// Galerkin-projected system without interpolation: the nonlinearity is lifted,
// evaluated at all N points, and projected back. Reference model for accuracy
// comparisons.
class PodGalerkinSystem {
 public:
  PodGalerkinSystem(const FullModel& m, const ReducedSystem& r, const Parameter& p)
      : m_(m), r_(r), p_(p) {}

  std::size_t dimension() const { return r_.k(); }

  void residual(std::span<const double> u_r, std::span<double> out) const {
    ++fe_;
    const std::size_t big_n = m_.size();
    Vector lifted(big_n, 0.0);
    for (std::size_t j = 0; j < r_.k(); ++j) axpy(u_r[j], r_.q.col(j), std::span<double>(lifted));
    Vector f(big_n);
    eval_reaction(lifted, p_, f);
    matvec(r_.a_r, u_r, out);
    axpy(1.0, r_.b_r, out);
    Vector qtf(r_.k());
    matvec_t(r_.q, f, qtf);
    axpy(1.0, qtf, out);
  }

  void dense_jacobian(std::span<const double> u_r, DenseMatrix& out) const {
    const std::size_t big_n = m_.size();
    Vector lifted(big_n, 0.0);
    for (std::size_t j = 0; j < r_.k(); ++j) axpy(u_r[j], r_.q.col(j), std::span<double>(lifted));
    Vector d(big_n);
    eval_reaction_jacobian(lifted, p_, d);
    DenseMatrix dq(big_n, r_.k());
    for (std::size_t j = 0; j < r_.k(); ++j)
      for (std::size_t i = 0; i < big_n; ++i) dq(i, j) = d[i] * r_.q(i, j);
    out = matmul_at_b(r_.q, dq);
    for (std::size_t j = 0; j < r_.k(); ++j)
      for (std::size_t i = 0; i < r_.k(); ++i) out(i, j) += r_.a_r(i, j);
  }

  std::uint64_t function_evaluations() const { return fe_; }
  void reset_function_evaluations() const { fe_ = 0; }

 private:
  const FullModel& m_;
  const ReducedSystem& r_;
  Parameter p_;
  mutable std::uint64_t fe_ = 0;
};

}  // namespace rombayes

#endif  // ROMBAYES_ROM_HPP
