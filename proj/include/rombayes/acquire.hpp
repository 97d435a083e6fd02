// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_ACQUIRE_HPP
#define ROMBAYES_ACQUIRE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rombayes/common.hpp"
#include "rombayes/model.hpp"
#include "rombayes/newton.hpp"
#include "rombayes/poisson.hpp"
#include "rombayes/rng.hpp"
#include "rombayes/rom.hpp"

namespace rombayes {

// RNG stream ids, fixed so every consumer draws from an independent stream of
// the same user seed.
inline constexpr std::uint64_t kStreamData = 0;      // observation noise
inline constexpr std::uint64_t kStreamProposal = 1;  // MCMC proposal steps
inline constexpr std::uint64_t kStreamAccept = 2;    // MCMC accept draws
inline constexpr std::uint64_t kStreamTrials = 3;    // snapshot trial points

enum class SamplingMode { grid, random };

struct AcquisitionOptions {
  std::size_t n_trial = 625;
  double tau_d = 1e-4;
  std::uint64_t seed = 1;
  SamplingMode sampling = SamplingMode::grid;
  PriorBox box;
  int max_outer = 50;
};

struct AcquisitionSample {
  Parameter xi;
  double indicator = 0.0;  // +inf when the reduced solve was skipped or failed
  bool accepted = false;
  bool full_solve_failed = false;
};

struct AcquisitionResult {
  DenseMatrix snapshots_u;  // N x s, first column is the initializer solve
  DenseMatrix snapshots_f;  // N x s, reaction term at the same states
  std::vector<AcquisitionSample> history;
  Parameter init_point;
  std::size_t accepted = 0;      // excluding the initializer
  std::size_t full_failures = 0; // trials skipped because the full solve failed
  std::size_t effective_trials = 0;
};

// Trial parameter points. Grid mode uses the largest m with m^2 <= n_trial and
// an inclusive-endpoint m x m tensor grid over the box; random mode draws
// uniformly (both on the linear scale).
inline std::vector<Parameter> trial_points(const AcquisitionOptions& opt) {
  std::vector<Parameter> pts;
  if (opt.sampling == SamplingMode::grid) {
    std::size_t m = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(opt.n_trial))));
    require(m >= 1, "trial_points: n_trial too small for grid sampling");
    auto coord = [&](std::size_t i) {
      if (m == 1) return 0.5 * (opt.box.lo + opt.box.hi);
      return opt.box.lo + (opt.box.hi - opt.box.lo) * static_cast<double>(i) / static_cast<double>(m - 1);
    };
    pts.reserve(m * m);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < m; ++i) pts.push_back({coord(i), coord(j)});
  } else {
    RngStream rng(opt.seed, kStreamTrials);
    pts.reserve(opt.n_trial);
    for (std::size_t i = 0; i < opt.n_trial; ++i)
      pts.push_back({rng.uniform(opt.box.lo, opt.box.hi), rng.uniform(opt.box.lo, opt.box.hi)});
  }
  return pts;
}

// Geometric center of the box; the basis initializer solve runs here.
inline Parameter box_center(const PriorBox& box) {
  const double c = std::exp(0.5 * (std::log(box.lo) + std::log(box.hi)));
  return {c, c};
}

namespace detail {

inline DenseMatrix pack_columns(const std::vector<Vector>& cols) {
  require(!cols.empty(), "pack_columns: no columns");
  DenseMatrix m(cols[0].size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    std::copy(cols[j].begin(), cols[j].end(), m.col(j).begin());
  return m;
}

}  // namespace detail

// Greedy snapshot acquisition. Starting from one full solve at the box center,
// each trial point is solved with the current reduced model; when the full
// residual of the lifted solution exceeds tau_d (relative to ||B||) the full
// model is solved there, the state and reaction snapshots are appended, and
// the bases are recomputed from scratch. tau_d <= 0 accepts every trial
// up front, so the reduced solves and intermediate rebuilds are skipped with
// identical results. Trials whose full solve fails are logged and skipped.
inline AcquisitionResult acquire_snapshots(const FullModel& m, const PoissonSolver& minv,
                                           const AcquisitionOptions& opt) {
  const std::size_t big_n = m.size();
  const std::vector<Parameter> trials = trial_points(opt);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  AcquisitionResult out;
  out.init_point = box_center(opt.box);
  out.effective_trials = trials.size();

  auto full_solve = [&](const Parameter& xi, Vector& u) {
    PreconditionedFullSystem sys(m, minv, xi);
    NewtonOptions nopt;
    nopt.step = StepMethod::gmres_analytic;
    nopt.max_outer = opt.max_outer;
    NewtonResult r = newton_solve(sys, Vector(big_n, 0.0), ForcingConfig{}, nopt);
    if (!r.converged) return false;
    u = std::move(r.u);
    return true;
  };

  std::vector<Vector> su, sf;
  {
    Vector u0;
    if (!full_solve(out.init_point, u0))
      throw ConvergenceError("acquire_snapshots: initializer full solve failed");
    Vector f0(big_n);
    eval_reaction(u0, out.init_point, f0);
    su.push_back(std::move(u0));
    sf.push_back(std::move(f0));
  }

  const bool accept_all = !(opt.tau_d > 0.0);
  ReducedSystem reduced;
  bool basis_dirty = true;

  for (const Parameter& xi : trials) {
    AcquisitionSample rec;
    rec.xi = xi;
    double indicator = kInf;

    if (!accept_all) {
      if (basis_dirty) {
        DenseMatrix s_u = detail::pack_columns(su);
        DenseMatrix s_f = detail::pack_columns(sf);
        ThinSvd svd_u = thin_svd(s_u);
        const std::size_t k_acq = numerical_rank(svd_u.sigma, s_u.rows(), s_u.cols());
        PodBasis pod;
        pod.sigma = svd_u.sigma;
        pod.q = DenseMatrix(big_n, k_acq);
        for (std::size_t j = 0; j < k_acq; ++j)
          std::copy(svd_u.u.col(j).begin(), svd_u.u.col(j).end(), pod.q.col(j).begin());
        ThinSvd svd_f = thin_svd(s_f);
        const std::size_t n_acq =
            std::max<std::size_t>(1, numerical_rank(svd_f.sigma, s_f.rows(), s_f.cols()));
        DenseMatrix v(big_n, n_acq);
        for (std::size_t j = 0; j < n_acq; ++j)
          std::copy(svd_f.u.col(j).begin(), svd_f.u.col(j).end(), v.col(j).begin());
        reduced = build_reduced_system(m, pod, make_interpolant(std::move(v)));
        basis_dirty = false;
      }
      DeimSystem sys(reduced, xi, /*preconditioned=*/false);
      NewtonOptions nopt;
      nopt.step = StepMethod::dense_lu;
      nopt.max_outer = opt.max_outer;
      nopt.tau_scale = 1e-2;
      NewtonResult r = newton_solve(sys, Vector(reduced.k(), 0.0), ForcingConfig{}, nopt);
      if (r.converged) indicator = error_indicator(m, reduced, r.u, xi);
    }

    rec.indicator = indicator;
    if (indicator > opt.tau_d) {
      Vector u;
      if (full_solve(xi, u)) {
        Vector f(big_n);
        eval_reaction(u, xi, f);
        su.push_back(std::move(u));
        sf.push_back(std::move(f));
        rec.accepted = true;
        ++out.accepted;
        basis_dirty = true;
      } else {
        rec.full_solve_failed = true;
        ++out.full_failures;
      }
    }
    out.history.push_back(rec);
  }

  out.snapshots_u = detail::pack_columns(su);
  out.snapshots_f = detail::pack_columns(sf);
  return out;
}

}  // namespace rombayes

#endif  // ROMBAYES_ACQUIRE_HPP
