// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_NEWTON_HPP
#define ROMBAYES_NEWTON_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rombayes/common.hpp"
#include "rombayes/dense.hpp"
#include "rombayes/gmres.hpp"

namespace rombayes {

// Requirements on a nonlinear system G(u) = 0 handed to the Newton driver.
template <class Sys>
concept NonlinearSystem = requires(const Sys& s, std::span<const double> u, std::span<double> out) {
  { s.dimension() } -> std::convertible_to<std::size_t>;
  s.residual(u, out);
  { s.function_evaluations() } -> std::convertible_to<std::uint64_t>;
};

template <class Sys>
concept HasApplyJacobian =
    requires(const Sys& s, std::span<const double> u, std::span<const double> v,
             std::span<double> out) { s.apply_jacobian(u, v, out); };

template <class Sys>
concept HasDenseJacobian =
    requires(const Sys& s, std::span<const double> u, DenseMatrix& j) { s.dense_jacobian(u, j); };

// Adaptive forcing-term schedule with safeguards.
struct ForcingConfig {
  double gamma = 0.9;
  double eta_max = 0.25;
  double tau_a = 1e-6;
  double tau_b = 1e-6;
};

// Forcing term for outer iteration i (0-based). norm_g / norm_g_prev are raw
// residual norms; tau is the absolute stopping threshold. The last safeguard
// keeps the linear solve from oversolving once norm_g approaches tau.
inline double forcing_term(int i, double eta_prev, double norm_g, double norm_g_prev, double tau,
                           const ForcingConfig& cfg = {}) {
  if (norm_g == 0.0) return cfg.eta_max;
  double eta_safe;
  if (i == 0) {
    eta_safe = cfg.eta_max;
  } else {
    const double eta_res = cfg.gamma * norm_g / norm_g_prev;
    const double carry = cfg.gamma * eta_prev * eta_prev;
    if (carry <= 0.1) {
      eta_safe = std::min(cfg.eta_max, eta_res);
    } else {
      eta_safe = std::min(cfg.eta_max, std::max(eta_res, carry));
    }
  }
  return std::min(cfg.eta_max, std::max(eta_safe, 0.5 * tau / norm_g));
}

// How the Newton correction J z = -G is solved. dense_lu forms the dense
// Jacobian (reduced systems); gmres_analytic uses exact Jacobian-vector
// products; gmres_fd approximates them by forward differences of the residual,
// so each Krylov vector costs one (counted) residual evaluation.
enum class StepMethod { dense_lu, gmres_analytic, gmres_fd };

struct NewtonOptions {
  StepMethod step = StepMethod::gmres_analytic;
  int max_outer = 50;
  int gmres_maxit = 200;
  // Multiplies the stopping threshold; reduced-model solves pass 1e-2 to run
  // two orders tighter than the full-model solves they stand in for.
  double tau_scale = 1.0;
};

struct NewtonHistoryRow {
  int outer = 0;
  std::uint64_t fe = 0;
  double residual_norm = 0.0;
};

struct NewtonResult {
  bool converged = false;
  int outer_iterations = 0;
  std::uint64_t function_evaluations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  double tau_abs = 0.0;  // stopping threshold on the raw residual norm
  std::vector<int> inner_iterations;
  std::vector<NewtonHistoryRow> history;
  std::string fe_convention;  // "residual-only" or "residual+directional"
  Vector u;
};

// Inexact Newton from initial guess u0, full steps, no globalization beyond a
// single half-step retry when the trial residual is non-finite.
//
// Stopping: ||G_i|| <= tau_abs with tau_abs = tau_scale * (tau_a +
// tau_b*||G(u0)||). tau_abs also feeds the forcing-term oversolve safeguard.
template <NonlinearSystem Sys>
NewtonResult newton_solve(const Sys& sys, const Vector& u0, const ForcingConfig& fc = {},
                          const NewtonOptions& opt = {}) {
  const std::size_t n = sys.dimension();
  require(u0.size() == n, "newton: initial guess has wrong size");
  require(opt.max_outer >= 1, "newton: max_outer must be >= 1");

  NewtonResult res;
  res.fe_convention = (opt.step == StepMethod::gmres_fd) ? "residual+directional" : "residual-only";
  const std::uint64_t fe0 = sys.function_evaluations();

  Vector u = u0;
  Vector g(n);
  sys.residual(u, g);
  double norm_g = norm2(g);
  if (!std::isfinite(norm_g)) {
    res.u = std::move(u);
    res.function_evaluations = sys.function_evaluations() - fe0;
    return res;
  }
  res.initial_residual = norm_g;
  const double tau_abs = opt.tau_scale * (fc.tau_a + fc.tau_b * norm_g);
  res.tau_abs = tau_abs;
  res.history.push_back({0, sys.function_evaluations() - fe0, norm_g});

  double eta_prev = fc.eta_max;
  double norm_g_prev = norm_g;
  DenseMatrix jac;

  for (int it = 0; it < opt.max_outer; ++it) {
    if (norm_g <= tau_abs) {
      res.converged = true;
      break;
    }
    const double eta = forcing_term(it, eta_prev, norm_g, norm_g_prev, tau_abs, fc);
    Vector z(n, 0.0);
    Vector rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = -g[i];
    int inner = 0;

    if (opt.step == StepMethod::dense_lu) {
      if constexpr (HasDenseJacobian<Sys>) {
        sys.dense_jacobian(u, jac);
        LuFactorization lu(jac);
        lu.solve(rhs, z);
      } else {
        throw std::invalid_argument("newton: system has no dense Jacobian");
      }
    } else if (opt.step == StepMethod::gmres_analytic) {
      if constexpr (HasApplyJacobian<Sys>) {
        LinOp jv = [&](std::span<const double> in, std::span<double> out) {
          sys.apply_jacobian(u, in, out);
        };
        auto gr = gmres(jv, rhs, z, eta, opt.gmres_maxit);
        inner = gr.iterations;
      } else {
        throw std::invalid_argument("newton: system has no Jacobian-vector product");
      }
    } else {
      const double norm_u = norm2(u);
      LinOp jv = [&](std::span<const double> in, std::span<double> out) {
        const double norm_v = norm2(in);
        if (norm_v == 0.0) {
          std::fill(out.begin(), out.end(), 0.0);
          return;
        }
        const double delta = 1e-8 * (1.0 + norm_u) / norm_v;
        Vector up(n);
        for (std::size_t i = 0; i < n; ++i) up[i] = u[i] + delta * in[i];
        sys.residual(up, out);
        const double inv = 1.0 / delta;
        for (std::size_t i = 0; i < n; ++i) out[i] = (out[i] - g[i]) * inv;
      };
      auto gr = gmres(jv, rhs, z, eta, opt.gmres_maxit);
      inner = gr.iterations;
    }
    res.inner_iterations.push_back(inner);

    Vector u_new(n), g_new(n);
    for (std::size_t i = 0; i < n; ++i) u_new[i] = u[i] + z[i];
    sys.residual(u_new, g_new);
    double norm_new = all_finite(g_new) ? norm2(g_new) : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(norm_new)) {
      // One half-step retry, then give up.
      for (std::size_t i = 0; i < n; ++i) u_new[i] = u[i] + 0.5 * z[i];
      sys.residual(u_new, g_new);
      norm_new = all_finite(g_new) ? norm2(g_new) : std::numeric_limits<double>::quiet_NaN();
      if (!std::isfinite(norm_new)) {
        res.outer_iterations = it + 1;
        res.final_residual = norm_g;
        res.u = std::move(u);
        res.function_evaluations = sys.function_evaluations() - fe0;
        return res;
      }
    }
    u = std::move(u_new);
    norm_g_prev = norm_g;
    norm_g = norm_new;
    g = std::move(g_new);
    eta_prev = eta;
    res.outer_iterations = it + 1;
    res.history.push_back({it + 1, sys.function_evaluations() - fe0, norm_g});
  }

  if (norm_g <= tau_abs) res.converged = true;
  res.final_residual = norm_g;
  res.u = std::move(u);
  res.function_evaluations = sys.function_evaluations() - fe0;
  return res;
}

}  // namespace rombayes

#endif  // ROMBAYES_NEWTON_HPP
