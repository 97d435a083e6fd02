// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_MODEL_HPP
#define ROMBAYES_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include "rombayes/common.hpp"
#include "rombayes/grid.hpp"
#include "rombayes/poisson.hpp"
#include "rombayes/sparse.hpp"

namespace rombayes {

// Scalar pair steering the exponential reaction term.
struct Parameter {
  double xi1 = 1.0;
  double xi2 = 0.1;
};

// Admissible parameter box (uniform prior support).
struct PriorBox {
  double lo = 0.01;
  double hi = 10.0;

  bool contains(const Parameter& p) const {
    return p.xi1 >= lo && p.xi1 <= hi && p.xi2 >= lo && p.xi2 <= hi;
  }
};

// 5-point Laplacian, scaled by 1/h^2: 4 on the diagonal, -1 for each interior
// neighbor, homogeneous Dirichlet boundaries.
inline SparseMatrix assemble_laplacian(const Grid& g) {
  const double s = 1.0 / (g.h() * g.h());
  std::vector<std::tuple<std::size_t, std::size_t, double>> trips;
  trips.reserve(5 * g.size());
  for (std::size_t j = 0; j < g.n_g; ++j) {
    for (std::size_t i = 0; i < g.n_g; ++i) {
      const std::size_t r = g.node(i, j);
      trips.emplace_back(r, r, 4.0 * s);
      if (i > 0) trips.emplace_back(r, g.node(i - 1, j), -s);
      if (i + 1 < g.n_g) trips.emplace_back(r, g.node(i + 1, j), -s);
      if (j > 0) trips.emplace_back(r, g.node(i, j - 1), -s);
      if (j + 1 < g.n_g) trips.emplace_back(r, g.node(i, j + 1), -s);
    }
  }
  return SparseMatrix::from_triplets(g.size(), g.size(), std::move(trips));
}

// Constant term of the residual: the negated source 100 sin(2 pi x1) sin(2 pi x2)
// evaluated at the interior points.
inline Vector assemble_source_term(const Grid& g) {
  Vector b(g.size());
  for (std::size_t j = 0; j < g.n_g; ++j) {
    const double s2 = std::sin(2.0 * kPi * g.x2(j));
    for (std::size_t i = 0; i < g.n_g; ++i) {
      b[g.node(i, j)] = -100.0 * std::sin(2.0 * kPi * g.x1(i)) * s2;
    }
  }
  return b;
}

// Pointwise reaction term F_i = (xi2/xi1) * (exp(xi1 * u_i) - 1).
// Arguments beyond the exp range produce Inf (no saturation); callers detect
// non-finite residuals.
inline void eval_reaction(std::span<const double> u, const Parameter& p, std::span<double> f) {
  require(p.xi1 != 0.0, "eval_reaction: xi1 must be nonzero");
  require(u.size() == f.size(), "eval_reaction: shape mismatch");
  const double c = p.xi2 / p.xi1;
  for (std::size_t i = 0; i < u.size(); ++i) f[i] = c * (std::exp(p.xi1 * u[i]) - 1.0);
}

// Diagonal of the reaction Jacobian: xi2 * exp(xi1 * u_i).
inline void eval_reaction_jacobian(std::span<const double> u, const Parameter& p,
                                   std::span<double> d) {
  require(u.size() == d.size(), "eval_reaction_jacobian: shape mismatch");
  for (std::size_t i = 0; i < u.size(); ++i) d[i] = p.xi2 * std::exp(p.xi1 * u[i]);
}

// Immutable assembled problem data for one grid.
struct FullModel {
  Grid grid;
  SparseMatrix a;
  Vector b;
  double norm_b;

  explicit FullModel(std::size_t n_g)
      : grid(n_g), a(assemble_laplacian(grid)), b(assemble_source_term(grid)), norm_b(norm2(b)) {}

  std::size_t size() const { return grid.size(); }

  // G(u; xi) = A u + F(u; xi) + B
  void residual(std::span<const double> u, const Parameter& p, std::span<double> out) const {
    spmv(a, u, out);
    Vector f(u.size());
    eval_reaction(u, p, f);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] += f[i] + b[i];
  }
};

// Nonlinear system adapters expose a common surface to the Newton driver:
// dimension(), residual() (counted), and analytic Jacobian-vector products.
// The evaluation counter increments exactly once per residual call.

// G(u) = A u + F(u) + B (unpreconditioned form).
class FullResidualSystem {
 public:
  FullResidualSystem(const FullModel& m, const Parameter& p) : m_(m), p_(p) {}

  std::size_t dimension() const { return m_.size(); }

  void residual(std::span<const double> u, std::span<double> out) const {
    ++fe_;
    m_.residual(u, p_, out);
  }

  // out = (A + diag(xi2 exp(xi1 u))) v
  void apply_jacobian(std::span<const double> u, std::span<const double> v,
                      std::span<double> out) const {
    spmv(m_.a, v, out);
    Vector d(u.size());
    eval_reaction_jacobian(u, p_, d);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] += d[i] * v[i];
  }

  std::uint64_t function_evaluations() const { return fe_; }
  void reset_function_evaluations() const { fe_ = 0; }

 private:
  const FullModel& m_;
  Parameter p_;
  mutable std::uint64_t fe_ = 0;
};

// Residual formulation preconditioned by the Poisson solve M ~ A^{-1}:
// g(u) = u + M F(u) + M B, Jacobian I + M diag(xi2 exp(xi1 u)).
class PreconditionedFullSystem {
 public:
  PreconditionedFullSystem(const FullModel& m, const PoissonSolver& minv, const Parameter& p)
      : m_(m), minv_(minv), p_(p), mb_(minv.apply(m.b)) {}

  std::size_t dimension() const { return m_.size(); }

  void residual(std::span<const double> u, std::span<double> out) const {
    ++fe_;
    Vector f(u.size());
    eval_reaction(u, p_, f);
    if (!all_finite(f)) {
      for (std::size_t i = 0; i < u.size(); ++i) out[i] = f[i];
      return;
    }
    minv_.apply(f, out);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] += u[i] + mb_[i];
  }

  void apply_jacobian(std::span<const double> u, std::span<const double> v,
                      std::span<double> out) const {
    Vector d(u.size());
    eval_reaction_jacobian(u, p_, d);
    for (std::size_t i = 0; i < u.size(); ++i) d[i] *= v[i];
    minv_.apply(d, out);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] += v[i];
  }

  std::uint64_t function_evaluations() const { return fe_; }
  void reset_function_evaluations() const { fe_ = 0; }

 private:
  const FullModel& m_;
  const PoissonSolver& minv_;
  Parameter p_;
  Vector mb_;
  mutable std::uint64_t fe_ = 0;
};

}  // namespace rombayes

#endif  // ROMBAYES_MODEL_HPP
