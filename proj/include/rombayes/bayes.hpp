// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_BAYES_HPP
#define ROMBAYES_BAYES_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "rombayes/acquire.hpp"
#include "rombayes/common.hpp"
#include "rombayes/dense.hpp"
#include "rombayes/model.hpp"
#include "rombayes/newton.hpp"
#include "rombayes/poisson.hpp"
#include "rombayes/rng.hpp"

namespace rombayes {

// Unnormalized log-posterior of the parameter given observations y_obs with
// iid Gaussian noise and a uniform prior on the box: -||y_obs - y(xi)||^2 /
// (2 sigma^2) inside, -inf outside (no forward solve is attempted outside).
// A forward failure inside the box also yields -inf and is counted.
struct Posterior {
  Vector y_obs;
  double sigma = 1e-2;
  PriorBox box;
  std::function<std::optional<Vector>(const Parameter&)> forward;
  mutable std::uint64_t forward_calls = 0;
  mutable std::uint64_t forward_failures = 0;

  double log_density(const Parameter& p) const {
    if (!box.contains(p)) return -std::numeric_limits<double>::infinity();
    ++forward_calls;
    std::optional<Vector> y = forward(p);
    if (!y.has_value() || y->size() != y_obs.size()) {
      ++forward_failures;
      return -std::numeric_limits<double>::infinity();
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y_obs.size(); ++i) {
      const double d = y_obs[i] - (*y)[i];
      s += d * d;
    }
    return -s / (2.0 * sigma * sigma);
  }
};

// Synthetic observations: full-model solve at xi_true plus sigma * N(0, I)
// noise drawn from the data stream of the seed.
inline Vector synthesize_data(const FullModel& m, const PoissonSolver& minv,
                              const Parameter& xi_true, double sigma, std::uint64_t seed) {
  PreconditionedFullSystem sys(m, minv, xi_true);
  NewtonResult r = newton_solve(sys, Vector(m.size(), 0.0));
  if (!r.converged) throw ConvergenceError("synthesize_data: forward solve at xi_true failed");
  RngStream rng(seed, kStreamData);
  Vector y = std::move(r.u);
  for (double& v : y) v += sigma * rng.normal();
  return y;
}

// Random-walk proposal in log coordinates: xi* = exp(log xi + L z) with
// L L^T = scale * (Gamma + epsilon I).
struct ProposalState {
  DenseMatrix gamma = DenseMatrix::identity(2);  // adapted covariance (log scale)
  double epsilon = 1e-8;
  double scale = 1.0;
  // Cholesky factor of scale * (gamma + epsilon I), refreshed by refresh().
  double l00 = 1.0, l10 = 0.0, l11 = 1.0;

  void refresh() {
    const double g00 = scale * (gamma(0, 0) + epsilon);
    const double g10 = scale * gamma(1, 0);
    const double g11 = scale * (gamma(1, 1) + epsilon);
    if (!(g00 > 0.0)) throw SingularMatrixError("proposal: covariance not positive definite");
    l00 = std::sqrt(g00);
    l10 = g10 / l00;
    const double rest = g11 - l10 * l10;
    if (!(rest > 0.0)) throw SingularMatrixError("proposal: covariance not positive definite");
    l11 = std::sqrt(rest);
  }
};

inline Parameter propose(const Parameter& x, const ProposalState& st, RngStream& rng) {
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  const double s1 = st.l00 * z1;
  const double s2 = st.l10 * z1 + st.l11 * z2;
  return {std::exp(std::log(x.xi1) + s1), std::exp(std::log(x.xi2) + s2)};
}

// Sample covariance of the logged states, divisor = sample count, plus nothing
// (the epsilon ridge is applied by the proposal, not here).
inline DenseMatrix update_covariance(const std::vector<std::array<double, 2>>& log_samples) {
  require(!log_samples.empty(), "update_covariance: no samples");
  const double inv = 1.0 / static_cast<double>(log_samples.size());
  double m0 = 0.0, m1 = 0.0;
  for (const auto& s : log_samples) {
    m0 += s[0];
    m1 += s[1];
  }
  m0 *= inv;
  m1 *= inv;
  DenseMatrix c(2, 2);
  for (const auto& s : log_samples) {
    const double d0 = s[0] - m0, d1 = s[1] - m1;
    c(0, 0) += d0 * d0;
    c(1, 0) += d1 * d0;
    c(1, 1) += d1 * d1;
  }
  c(0, 0) *= inv;
  c(1, 0) *= inv;
  c(0, 1) = c(1, 0);
  c(1, 1) *= inv;
  return c;
}

// Accept iff ln(theta) < delta for theta ~ U(0,1); delta is the log-posterior
// difference (plus the optional change-of-variables term).
inline bool accept_step(double delta, RngStream& rng) {
  const double u = rng.uniform_open();
  return std::log(u) < delta;
}

struct ChainOptions {
  std::size_t m = 20000;        // number of MH steps = rows written
  std::size_t stride = 100;     // covariance refresh period
  double epsilon = 1e-8;
  double proposal_scale = 1.0;
  // When true the asymmetry of the lognormal random walk is corrected, making
  // the chain exact for the stated density. Off by default: the plain
  // log-posterior difference is used.
  bool jacobian_correction = false;
  std::uint64_t seed = 1;
  std::optional<Parameter> x0;  // default: geometric center of the box
};

struct ChainResult {
  std::vector<double> xi1, xi2, log_post;
  std::vector<std::uint8_t> accepted;
  Parameter x0;
  double initial_log_post = 0.0;
  double acceptance_rate = 0.0;
  std::size_t covariance_updates = 0;
  std::uint64_t forward_calls = 0;
  std::uint64_t forward_failures = 0;

  std::size_t size() const { return xi1.size(); }
};

// Adaptive Metropolis-Hastings: lognormal random walk whose log-scale
// covariance is re-estimated from the whole history every stride steps
// (identity start). Rejected steps repeat the previous state. All stored
// states lie inside the box, so their log-posteriors are finite.
inline ChainResult run_chain(const Posterior& post, const ChainOptions& opt) {
  require(opt.m >= 1, "run_chain: m must be >= 1");
  require(opt.stride >= 1, "run_chain: stride must be >= 1");

  Parameter x = opt.x0.value_or(box_center(post.box));
  require(post.box.contains(x), "run_chain: x0 outside the parameter box");
  const std::uint64_t calls0 = post.forward_calls, fails0 = post.forward_failures;
  double lp = post.log_density(x);
  if (!std::isfinite(lp)) throw ConvergenceError("run_chain: forward solve failed at x0");

  ProposalState st;
  st.epsilon = opt.epsilon;
  st.scale = opt.proposal_scale;
  st.refresh();

  RngStream prop_rng(opt.seed, kStreamProposal);
  RngStream acc_rng(opt.seed, kStreamAccept);

  ChainResult out;
  out.x0 = x;
  out.initial_log_post = lp;
  out.xi1.reserve(opt.m);
  out.xi2.reserve(opt.m);
  out.log_post.reserve(opt.m);
  out.accepted.reserve(opt.m);

  std::vector<std::array<double, 2>> log_states;
  log_states.reserve(opt.m + 1);
  log_states.push_back({std::log(x.xi1), std::log(x.xi2)});

  std::size_t accepted_count = 0;
  for (std::size_t it = 1; it <= opt.m; ++it) {
    if (it > 1 && (it - 1) % opt.stride == 0) {
      st.gamma = update_covariance(log_states);
      st.refresh();
      ++out.covariance_updates;
    }
    const Parameter cand = propose(x, st, prop_rng);
    const double lp_cand = post.log_density(cand);
    double delta = lp_cand - lp;
    if (opt.jacobian_correction && std::isfinite(lp_cand)) {
      delta += std::log(cand.xi1) - std::log(x.xi1) + std::log(cand.xi2) - std::log(x.xi2);
    }
    const bool acc = accept_step(delta, acc_rng);
    if (acc) {
      x = cand;
      lp = lp_cand;
      ++accepted_count;
    }
    out.xi1.push_back(x.xi1);
    out.xi2.push_back(x.xi2);
    out.log_post.push_back(lp);
    out.accepted.push_back(acc ? 1 : 0);
    log_states.push_back({std::log(x.xi1), std::log(x.xi2)});
  }

  out.acceptance_rate = static_cast<double>(accepted_count) / static_cast<double>(opt.m);
  out.forward_calls = post.forward_calls - calls0;
  out.forward_failures = post.forward_failures - fails0;
  return out;
}

}  // namespace rombayes

#endif  // ROMBAYES_BAYES_HPP
