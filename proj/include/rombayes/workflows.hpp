// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_WORKFLOWS_HPP
#define ROMBAYES_WORKFLOWS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rombayes/acquire.hpp"
#include "rombayes/bayes.hpp"
#include "rombayes/common.hpp"
#include "rombayes/dense.hpp"
#include "rombayes/diagnostics.hpp"
#include "rombayes/io.hpp"
#include "rombayes/model.hpp"
#include "rombayes/newton.hpp"
#include "rombayes/poisson.hpp"
#include "rombayes/rng.hpp"
#include "rombayes/rom.hpp"

// End-to-end commands behind the CLI: forward solves, snapshot acquisition and
// basis construction, posterior sampling, chain diagnostics, and the canned
// comparison studies. Each run_* function validates its options, writes its
// artifacts under opts.out, and returns the numbers it produced so tests can
// assert on them without re-reading files.

namespace rombayes {

namespace detail {

inline std::chrono::steady_clock::time_point tic() { return std::chrono::steady_clock::now(); }

inline double toc(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline double median(std::vector<double> v) {
  require(!v.empty(), "median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return (v.size() % 2 == 1) ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline std::string format_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", s);
  return buf;
}

}  // namespace detail

inline PoissonSolver::Variant parse_precond(const std::string& s) {
  if (s == "direct") return PoissonSolver::Variant::direct;
  if (s == "multigrid") return PoissonSolver::Variant::multigrid;
  throw std::invalid_argument("unknown preconditioner '" + s + "' (expected direct or multigrid)");
}

inline SamplingMode parse_sampling(const std::string& s) {
  if (s == "grid") return SamplingMode::grid;
  if (s == "random") return SamplingMode::random;
  throw std::invalid_argument("unknown sampling mode '" + s + "' (expected grid or random)");
}

inline StepMethod parse_step(const std::string& s) {
  if (s == "fd") return StepMethod::gmres_fd;
  if (s == "analytic") return StepMethod::gmres_analytic;
  throw std::invalid_argument("unknown step method '" + s + "' (expected fd or analytic)");
}

// Leading k columns of a (copy).
inline DenseMatrix leading_columns(const DenseMatrix& m, std::size_t k) {
  require(k >= 1 && k <= m.cols(), "leading_columns: k out of range");
  DenseMatrix out(m.rows(), k);
  for (std::size_t j = 0; j < k; ++j) {
    auto src = m.col(j);
    auto dst = out.col(j);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

// Rebuild an interpolant from stored parts instead of re-running the greedy
// point selection. Used when a basis bundle is loaded from disk.
inline DeimInterpolant interpolant_from_parts(DenseMatrix v, std::vector<std::size_t> p) {
  const std::size_t n = v.cols();
  require(n >= 1 && p.size() == n, "interpolant_from_parts: V and p disagree");
  for (std::size_t i = 0; i < n; ++i)
    require(p[i] < v.rows(), "interpolant_from_parts: index out of range");
  DenseMatrix ptv(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) ptv(i, j) = v(p[i], j);
  DeimInterpolant d;
  d.ptv_inv = LuFactorization(ptv).inverse();
  d.v = std::move(v);
  d.p = std::move(p);
  return d;
}

// The point-selection greedy is nested: the length-n prefix of the index list
// is exactly the selection for the leading n basis columns. Truncation of a
// stored pair (V, p) is therefore just column/prefix slicing.
inline DeimInterpolant truncate_interpolant(const DenseMatrix& v, const std::vector<std::size_t>& p,
                                            std::size_t n) {
  require(n >= 1 && n <= v.cols(), "truncate_interpolant: n out of range");
  return interpolant_from_parts(leading_columns(v, n),
                                std::vector<std::size_t>(p.begin(), p.begin() + n));
}

inline Vector lift(const ReducedSystem& red, const Vector& u_r) {
  Vector out(red.full_dim, 0.0);
  for (std::size_t j = 0; j < red.k(); ++j) axpy(u_r[j], red.q.col(j), std::span<double>(out));
  return out;
}

// One Newton solve plus wall time and the fields reports care about.
struct SolveRecord {
  bool present = false;
  bool converged = false;
  int outer = 0;
  std::uint64_t fe = 0;
  int total_inner = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  double seconds = 0.0;
  std::string fe_convention;
  std::vector<NewtonHistoryRow> history;
  Vector u;  // full-space state (reduced solves are lifted before storing)
};

inline void write_convergence_csv(const std::filesystem::path& path, const SolveRecord& rec) {
  std::string buf = "outer,fe,residual_norm\n";
  for (const auto& row : rec.history) {
    buf += std::to_string(row.outer);
    buf += ',';
    buf += std::to_string(row.fe);
    buf += ',';
    buf += detail::format_g17(row.residual_norm);
    buf += '\n';
  }
  detail::write_file_bytes(path, buf);
}

// ---------------------------------------------------------------------------
// forward: solve the stationary problem with the full model and/or a reduced
// model loaded from a bundle, and compare the states.
// ---------------------------------------------------------------------------

struct ForwardOptions {
  std::size_t n_g = 32;
  Parameter xi{};                  // default (1, 0.1)
  std::string model = "all";       // full | deim | pod-galerkin | all
  std::string precond = "direct";  // direct | multigrid
  std::string step = "fd";         // Krylov step: fd | analytic
  std::filesystem::path bundle;    // required unless model == full
  std::size_t k = 0;               // optional sub-truncation of the bundle (0 = keep all)
  std::size_t n = 0;
  std::filesystem::path out;  // artifact directory; empty writes nothing
};

struct ForwardReport {
  std::size_t n_g = 0;
  std::size_t full_dim = 0;
  std::size_t k = 0, n = 0;  // reduced dimensions actually used (0 when unused)
  SolveRecord full, deim, pg;
  // Relative l2 state differences; -1 until computed (requires model == all).
  double rel_deim = -1.0;
  double rel_redb = -1.0;  // projection-only reduced model vs full
  double rel_dr = -1.0;    // interpolated vs projection-only reduced model
};

template <class Sys>
SolveRecord timed_solve(const Sys& sys, std::size_t dim, const NewtonOptions& opt) {
  const auto t0 = detail::tic();
  NewtonResult r = newton_solve(sys, Vector(dim, 0.0), ForcingConfig{}, opt);
  SolveRecord rec;
  rec.present = true;
  rec.seconds = detail::toc(t0);
  rec.converged = r.converged;
  rec.outer = r.outer_iterations;
  rec.fe = r.function_evaluations;
  for (int it : r.inner_iterations) rec.total_inner += it;
  rec.initial_residual = r.initial_residual;
  rec.final_residual = r.final_residual;
  rec.fe_convention = r.fe_convention;
  rec.history = std::move(r.history);
  rec.u = std::move(r.u);
  return rec;
}

inline ForwardReport run_forward(const ForwardOptions& opt) {
  const bool want_full = opt.model == "full" || opt.model == "all";
  const bool want_deim = opt.model == "deim" || opt.model == "all";
  const bool want_pg = opt.model == "pod-galerkin" || opt.model == "all";
  require(want_full || want_deim || want_pg,
          "unknown model '" + opt.model + "' (expected full, deim, pod-galerkin, or all)");
  require(PriorBox{}.contains(opt.xi), "forward: xi outside the admissible box");

  FullModel m(opt.n_g);
  PoissonSolver minv(m.grid, m.a, parse_precond(opt.precond));
  const StepMethod step = parse_step(opt.step);

  ForwardReport rep;
  rep.n_g = opt.n_g;
  rep.full_dim = m.size();

  if (want_full) {
    PreconditionedFullSystem sys(m, minv, opt.xi);
    NewtonOptions no;
    no.step = step;
    rep.full = timed_solve(sys, m.size(), no);
  }

  ReducedSystem red;
  if (want_deim || want_pg) {
    require(!opt.bundle.empty(), "forward: --bundle is required for reduced models");
    LoadedBundle b = load_bundle(opt.bundle);
    require(b.q.rows() == m.size(), "forward: bundle was built for a different grid");
    const std::size_t k_use = opt.k == 0 ? b.q.cols() : std::min(opt.k, b.q.cols());
    const std::size_t n_use = opt.n == 0 ? b.v.cols() : std::min(opt.n, b.v.cols());
    PodBasis pod;
    pod.q = leading_columns(b.q, k_use);
    DeimInterpolant interp = truncate_interpolant(b.v, b.p, n_use);
    red = build_reduced_system(m, pod, interp, &minv);
    rep.k = k_use;
    rep.n = n_use;
  }

  if (want_deim) {
    DeimSystem sys(red, opt.xi, /*preconditioned=*/true);
    NewtonOptions no;
    no.step = step;
    rep.deim = timed_solve(sys, red.k(), no);
    rep.deim.u = lift(red, rep.deim.u);
  }
  if (want_pg) {
    PodGalerkinSystem sys(m, red, opt.xi);
    NewtonOptions no;
    no.step = StepMethod::dense_lu;  // projection-only model has a cheap dense Jacobian
    rep.pg = timed_solve(sys, red.k(), no);
    rep.pg.u = lift(red, rep.pg.u);
  }

  if (want_full && rep.full.converged) {
    const double ref = norm2(rep.full.u);
    auto rel_diff = [&](const Vector& u) {
      Vector d = u;
      axpy(-1.0, rep.full.u, std::span<double>(d));
      return norm2(d) / ref;
    };
    if (want_deim && rep.deim.converged) rep.rel_deim = rel_diff(rep.deim.u);
    if (want_pg && rep.pg.converged) rep.rel_redb = rel_diff(rep.pg.u);
    if (want_deim && want_pg && rep.deim.converged && rep.pg.converged) {
      Vector d = rep.deim.u;
      axpy(-1.0, rep.pg.u, std::span<double>(d));
      rep.rel_dr = norm2(d) / ref;
    }
  }

  if (!opt.out.empty()) {
    std::filesystem::create_directories(opt.out);
    auto dump = [&](const char* name, const SolveRecord& rec) {
      if (!rec.present) return;
      write_vector_file(opt.out / (std::string("u_") + name + ".m64"), rec.u);
      write_convergence_csv(opt.out / (std::string("convergence_") + name + ".csv"), rec);
    };
    dump("full", rep.full);
    dump("deim", rep.deim);
    dump("pg", rep.pg);
    if (rep.rel_deim >= 0.0 || rep.rel_redb >= 0.0 || rep.rel_dr >= 0.0) {
      std::string buf;
      if (rep.rel_deim >= 0.0) buf += "rel_deim = " + detail::format_g17(rep.rel_deim) + "\n";
      if (rep.rel_redb >= 0.0) buf += "rel_redb = " + detail::format_g17(rep.rel_redb) + "\n";
      if (rep.rel_dr >= 0.0) buf += "rel_dr = " + detail::format_g17(rep.rel_dr) + "\n";
      detail::write_file_bytes(opt.out / "errors.txt", buf);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// build-rom: acquire snapshots over the parameter box, compress them, and save
// a basis bundle.
// ---------------------------------------------------------------------------

struct BuildRomOptions {
  std::size_t n_g = 32;
  std::size_t k = 100;  // requested state-basis size; clamped to the snapshot rank
  std::size_t n = 100;  // requested interpolation-basis size; clamped likewise
  std::size_t n_trial = 625;
  double tau_d = 1e-4;
  std::uint64_t seed = 1;
  std::string sampling = "grid";
  std::string precond = "direct";
  std::filesystem::path out;  // bundle directory (required)
};

struct BuildRomReport {
  std::size_t full_dim = 0;
  std::size_t snapshot_count = 0;  // columns, including the initializer solve
  std::size_t accepted = 0;
  std::size_t full_failures = 0;
  std::size_t effective_trials = 0;
  std::size_t rank_u = 0, rank_f = 0;
  std::size_t k = 0, n = 0;  // bundle dimensions actually written
  Parameter init_point{};
  double seconds_acquire = 0.0;
  double seconds_total = 0.0;
  std::filesystem::path bundle_dir;
};

inline BuildRomReport run_build_rom(const BuildRomOptions& opt) {
  require(!opt.out.empty(), "build-rom: --out is required");
  require(opt.k >= 1 && opt.n >= 1, "build-rom: k and n must be >= 1");
  const auto t0 = detail::tic();

  FullModel m(opt.n_g);
  PoissonSolver minv(m.grid, m.a, parse_precond(opt.precond));

  AcquisitionOptions ao;
  ao.n_trial = opt.n_trial;
  ao.tau_d = opt.tau_d;
  ao.seed = opt.seed;
  ao.sampling = parse_sampling(opt.sampling);
  const auto t_acq = detail::tic();
  AcquisitionResult acq = acquire_snapshots(m, minv, ao);

  BuildRomReport rep;
  rep.full_dim = m.size();
  rep.seconds_acquire = detail::toc(t_acq);
  rep.snapshot_count = acq.snapshots_u.cols();
  rep.accepted = acq.accepted;
  rep.full_failures = acq.full_failures;
  rep.effective_trials = acq.effective_trials;
  rep.init_point = acq.init_point;

  ThinSvd svd_u = thin_svd(acq.snapshots_u);
  rep.rank_u = numerical_rank(svd_u.sigma, acq.snapshots_u.rows(), acq.snapshots_u.cols());
  rep.k = std::min(opt.k, rep.rank_u);
  PodBasis pod;
  pod.q = leading_columns(svd_u.u, rep.k);
  pod.sigma = svd_u.sigma;

  ThinSvd svd_f = thin_svd(acq.snapshots_f);
  rep.rank_f = numerical_rank(svd_f.sigma, acq.snapshots_f.rows(), acq.snapshots_f.cols());
  rep.n = std::min(opt.n, rep.rank_f);
  DeimInterpolant interp = make_interpolant(leading_columns(svd_f.u, rep.n));

  std::vector<std::pair<std::string, std::string>> meta = {
      {"N", std::to_string(rep.full_dim)},
      {"k", std::to_string(rep.k)},
      {"n", std::to_string(rep.n)},
      {"tau_d", detail::format_g17(opt.tau_d)},
      {"seed", std::to_string(opt.seed)},
      {"snapshot_count", std::to_string(rep.snapshot_count)},
      {"n_g", std::to_string(opt.n_g)},
      {"n_trial", std::to_string(opt.n_trial)},
      {"sampling", opt.sampling},
      {"rng", kRngName},
      {"requested_k", std::to_string(opt.k)},
      {"requested_n", std::to_string(opt.n)},
      {"accepted", std::to_string(rep.accepted)},
      {"full_failures", std::to_string(rep.full_failures)},
      {"effective_trials", std::to_string(rep.effective_trials)},
      {"rank_u", std::to_string(rep.rank_u)},
      {"rank_f", std::to_string(rep.rank_f)},
      {"init_xi1", detail::format_g17(rep.init_point.xi1)},
      {"init_xi2", detail::format_g17(rep.init_point.xi2)},
      {"precond", opt.precond},
  };
  save_bundle(opt.out, pod.q, interp.v, interp.p, meta);

  std::string hist = "trial,xi1,xi2,indicator,accepted,full_solve_failed\n";
  for (std::size_t i = 0; i < acq.history.size(); ++i) {
    const AcquisitionSample& s = acq.history[i];
    hist += std::to_string(i + 1);
    hist += ',';
    hist += detail::format_g17(s.xi.xi1);
    hist += ',';
    hist += detail::format_g17(s.xi.xi2);
    hist += ',';
    hist += detail::format_g17(s.indicator);
    hist += ',';
    hist += s.accepted ? '1' : '0';
    hist += ',';
    hist += s.full_solve_failed ? '1' : '0';
    hist += '\n';
  }
  detail::write_file_bytes(opt.out / "acquisition_history.csv", hist);

  rep.seconds_total = detail::toc(t0);
  rep.bundle_dir = opt.out;
  return rep;
}

// ---------------------------------------------------------------------------
// mcmc: sample the posterior of the reaction parameters given noisy state
// observations, with either the full model or a bundled reduced model as the
// forward map.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultBurnIn = std::numeric_limits<std::size_t>::max();

struct McmcOptions {
  std::size_t n_g = 64;
  std::string model = "deim";  // deim | full
  std::filesystem::path bundle;
  std::filesystem::path y_obs;  // observation file; empty synthesizes data
  Parameter xi_true{};          // used only when synthesizing
  double sigma = 1e-2;
  std::size_t m = 20000;
  std::size_t burn_in = kDefaultBurnIn;  // summary means only; default m/2
  std::size_t stride = 100;
  double epsilon = 1e-8;
  double proposal_scale = 1.0;
  bool jacobian_correction = false;
  std::uint64_t seed = 1;
  std::string precond = "direct";
  std::filesystem::path out;
};

struct McmcReport {
  ChainResult chain;
  std::size_t full_dim = 0;
  std::size_t burn_used = 0;
  double mean_xi1 = 0.0, mean_xi2 = 0.0;  // post burn-in
  double seconds_chain = 0.0;
  double seconds_total = 0.0;
  std::string y_source;
  std::filesystem::path chain_path;
};

// Forward map used inside the sampler: the reduced solve runs two orders
// tighter than its stopping default so surrogate error stays below the
// observation noise, and uses analytic Jacobian-vector products because the
// dense reduced Jacobian would dominate the per-step cost.
inline std::optional<Vector> reduced_forward(const ReducedSystem& red, const Parameter& p) {
  DeimSystem sys(red, p, /*preconditioned=*/true);
  NewtonOptions no;
  no.step = StepMethod::gmres_analytic;
  no.tau_scale = 1e-2;
  NewtonResult r = newton_solve(sys, Vector(red.k(), 0.0), ForcingConfig{}, no);
  if (!r.converged) return std::nullopt;
  return lift(red, r.u);
}

inline std::optional<Vector> full_forward(const FullModel& m, const PoissonSolver& minv,
                                          const Parameter& p) {
  PreconditionedFullSystem sys(m, minv, p);
  NewtonResult r = newton_solve(sys, Vector(m.size(), 0.0));
  if (!r.converged) return std::nullopt;
  return std::move(r.u);
}

inline McmcReport run_mcmc(const McmcOptions& opt) {
  require(!opt.out.empty(), "mcmc: --out is required");
  require(opt.model == "deim" || opt.model == "full",
          "unknown model '" + opt.model + "' (expected deim or full)");
  require(opt.m >= 1, "mcmc: need at least one step");
  const std::size_t burn = opt.burn_in == kDefaultBurnIn ? opt.m / 2 : opt.burn_in;
  require(burn < opt.m, "mcmc: burn-in must leave at least one sample");
  const auto t0 = detail::tic();

  FullModel m(opt.n_g);
  PoissonSolver minv(m.grid, m.a, parse_precond(opt.precond));

  ReducedSystem red;
  if (opt.model == "deim") {
    require(!opt.bundle.empty(), "mcmc: --bundle is required for the reduced model");
    LoadedBundle b = load_bundle(opt.bundle);
    require(b.q.rows() == m.size(), "mcmc: bundle was built for a different grid");
    PodBasis pod;
    pod.q = std::move(b.q);
    DeimInterpolant interp = interpolant_from_parts(std::move(b.v), std::move(b.p));
    red = build_reduced_system(m, pod, interp, &minv);
  }

  McmcReport rep;
  rep.full_dim = m.size();
  rep.burn_used = burn;

  Vector y;
  if (!opt.y_obs.empty()) {
    y = read_vector_file(opt.y_obs);
    require(y.size() == m.size(), "mcmc: observation vector does not match the grid");
    rep.y_source = opt.y_obs.string();
  } else {
    y = synthesize_data(m, minv, opt.xi_true, opt.sigma, opt.seed);
    rep.y_source = "synthesized";
  }

  Posterior post;
  post.y_obs = y;
  post.sigma = opt.sigma;
  if (opt.model == "deim") {
    post.forward = [&red](const Parameter& p) { return reduced_forward(red, p); };
  } else {
    post.forward = [&m, &minv](const Parameter& p) { return full_forward(m, minv, p); };
  }

  ChainOptions co;
  co.m = opt.m;
  co.stride = opt.stride;
  co.epsilon = opt.epsilon;
  co.proposal_scale = opt.proposal_scale;
  co.jacobian_correction = opt.jacobian_correction;
  co.seed = opt.seed;
  const auto t_chain = detail::tic();
  rep.chain = run_chain(post, co);
  rep.seconds_chain = detail::toc(t_chain);

  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = burn; i < rep.chain.size(); ++i) {
    s1 += rep.chain.xi1[i];
    s2 += rep.chain.xi2[i];
  }
  const double used = double(rep.chain.size() - burn);
  rep.mean_xi1 = s1 / used;
  rep.mean_xi2 = s2 / used;

  std::filesystem::create_directories(opt.out);
  rep.chain_path = opt.out / "chain.csv";
  write_chain_csv(rep.chain_path, rep.chain);
  write_vector_file(opt.out / "y_obs.m64", y);

  rep.seconds_total = detail::toc(t0);
  std::string s;
  s += "command = mcmc\n";
  s += "model = " + opt.model + "\n";
  s += "n_g = " + std::to_string(opt.n_g) + "\n";
  s += "N = " + std::to_string(rep.full_dim) + "\n";
  if (opt.model == "deim")
    s += "bundle = " + opt.bundle.string() + " (k = " + std::to_string(red.k()) +
         ", n = " + std::to_string(red.n()) + ")\n";
  if (rep.y_source == "synthesized")
    s += "y_obs = synthesized (xi_true = " + detail::format_g17(opt.xi_true.xi1) + " " +
         detail::format_g17(opt.xi_true.xi2) + ", sigma = " + detail::format_g17(opt.sigma) +
         ", seed = " + std::to_string(opt.seed) + ")\n";
  else
    s += "y_obs = " + rep.y_source + "\n";
  s += "steps = " + std::to_string(opt.m) + "\n";
  s += "burn_in = " + std::to_string(burn) + "\n";
  s += "stride = " + std::to_string(opt.stride) + "\n";
  s += "epsilon = " + detail::format_g17(opt.epsilon) + "\n";
  s += "proposal_scale = " + detail::format_g17(opt.proposal_scale) + "\n";
  s += "jacobian_correction = " + std::string(opt.jacobian_correction ? "1" : "0") + "\n";
  s += "seed = " + std::to_string(opt.seed) + "\n";
  s += "rng = " + std::string(kRngName) + "\n";
  s += "acceptance_rate = " + detail::format_g17(rep.chain.acceptance_rate) + "\n";
  s += "covariance_updates = " + std::to_string(rep.chain.covariance_updates) + "\n";
  s += "forward_calls = " + std::to_string(rep.chain.forward_calls) + "\n";
  s += "forward_failures = " + std::to_string(rep.chain.forward_failures) + "\n";
  s += "mean_xi1_post_burn = " + detail::format_g17(rep.mean_xi1) + "\n";
  s += "mean_xi2_post_burn = " + detail::format_g17(rep.mean_xi2) + "\n";
  s += "chain_seconds = " + detail::format_seconds(rep.seconds_chain) + "\n";
  s += "total_seconds = " + detail::format_seconds(rep.seconds_total) + "\n";
  detail::write_file_bytes(opt.out / "summary.txt", s);
  return rep;
}

// ---------------------------------------------------------------------------
// diagnose: summarize a stored chain and emit plot-ready data files.
// ---------------------------------------------------------------------------

struct ComponentSummary {
  double mean = 0.0;
  double sd = 0.0;
  IntervalEstimate ci{};
  double iact = 0.0;
  GewekeResult geweke{};
  bool geweke_ok = false;  // false when the post-burn sample is too short
};

struct ChainSummary {
  std::size_t rows = 0;
  std::size_t burn = 0;
  std::size_t used = 0;
  ComponentSummary xi1, xi2;
};

inline ComponentSummary summarize_component(const Vector& x, double level) {
  ComponentSummary c;
  double s = 0.0;
  for (double v : x) s += v;
  c.mean = s / double(x.size());
  if (x.size() >= 2) {
    double q = 0.0;
    for (double v : x) q += (v - c.mean) * (v - c.mean);
    c.sd = std::sqrt(q / double(x.size() - 1));
  }
  c.ci = confidence_interval(x, level);
  c.iact = iact(x);
  try {
    c.geweke = geweke(x);
    c.geweke_ok = true;
  } catch (const std::exception&) {
    c.geweke_ok = false;
  }
  return c;
}

inline ChainSummary summarize_chain(const Vector& xi1, const Vector& xi2, std::size_t burn,
                                    double level = 0.95) {
  require(xi1.size() == xi2.size() && !xi1.empty(), "summarize_chain: malformed chain");
  require(burn + 2 <= xi1.size(), "summarize_chain: burn-in leaves fewer than two samples");
  ChainSummary cs;
  cs.rows = xi1.size();
  cs.burn = burn;
  cs.used = xi1.size() - burn;
  cs.xi1 = summarize_component(burn_in(xi1, burn), level);
  cs.xi2 = summarize_component(burn_in(xi2, burn), level);
  return cs;
}

struct DiagnoseOptions {
  std::filesystem::path chain;           // chain.csv to read (required)
  std::size_t burn_in = kDefaultBurnIn;  // default: half the rows
  std::size_t bins = 40;
  double level = 0.95;
  std::size_t max_lag = 100;  // autocorrelation lags written to acf.csv
  std::filesystem::path out;
};

struct DiagnoseReport {
  ChainSummary summary;
  double acceptance_rate = 0.0;
};

inline void write_chain_diagnostics(const std::filesystem::path& out, const Vector& xi1,
                                    const Vector& xi2, std::size_t burn, std::size_t bins,
                                    std::size_t max_lag, const ChainSummary& cs,
                                    double acceptance_rate) {
  std::filesystem::create_directories(out);
  const Vector a = burn_in(xi1, burn);
  const Vector b = burn_in(xi2, burn);

  const std::size_t lags = std::min(max_lag, a.size() - 1);
  const Vector r1 = acf(a, lags);
  const Vector r2 = acf(b, lags);
  std::string buf = "lag,acf_xi1,acf_xi2\n";
  for (std::size_t j = 0; j < r1.size(); ++j)
    buf += std::to_string(j) + "," + detail::format_g17(r1[j]) + "," + detail::format_g17(r2[j]) +
           "\n";
  detail::write_file_bytes(out / "acf.csv", buf);

  auto write_hist = [&](const char* name, const Vector& x) {
    const Histogram h = histogram(x, bins);
    std::string hb = "lo,hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
      hb += detail::format_g17(h.edges[i]) + "," + detail::format_g17(h.edges[i + 1]) + "," +
            std::to_string(h.counts[i]) + "\n";
    detail::write_file_bytes(out / name, hb);
  };
  write_hist("hist_xi1.csv", a);
  write_hist("hist_xi2.csv", b);

  std::string sc = "xi1,xi2\n";
  for (std::size_t i = 0; i < a.size(); ++i)
    sc += detail::format_g17(a[i]) + "," + detail::format_g17(b[i]) + "\n";
  detail::write_file_bytes(out / "scatter.csv", sc);

  auto comp_block = [&](const char* name, const ComponentSummary& c) {
    std::string t;
    t += std::string(name) + ".mean = " + detail::format_g17(c.mean) + "\n";
    t += std::string(name) + ".sd = " + detail::format_g17(c.sd) + "\n";
    t += std::string(name) + ".ci_lo = " + detail::format_g17(c.ci.lo) + "\n";
    t += std::string(name) + ".ci_hi = " + detail::format_g17(c.ci.hi) + "\n";
    t += std::string(name) + ".ci_mid = " + detail::format_g17(c.ci.midpoint) + "\n";
    t += std::string(name) + ".iact = " + detail::format_g17(c.iact) + "\n";
    if (c.geweke_ok) {
      t += std::string(name) + ".geweke_z = " + detail::format_g17(c.geweke.z) + "\n";
      t += std::string(name) + ".geweke_p = " + detail::format_g17(c.geweke.p) + "\n";
    } else {
      t += std::string(name) + ".geweke_z = n/a\n";
      t += std::string(name) + ".geweke_p = n/a\n";
    }
    return t;
  };
  std::string rp;
  rp += "rows = " + std::to_string(cs.rows) + "\n";
  rp += "burn_in = " + std::to_string(cs.burn) + "\n";
  rp += "used = " + std::to_string(cs.used) + "\n";
  rp += "acceptance_rate = " + detail::format_g17(acceptance_rate) + "\n";
  rp += comp_block("xi1", cs.xi1);
  rp += comp_block("xi2", cs.xi2);
  detail::write_file_bytes(out / "report.txt", rp);
}

inline DiagnoseReport run_diagnose(const DiagnoseOptions& opt) {
  require(!opt.chain.empty(), "diagnose: --chain is required");
  require(!opt.out.empty(), "diagnose: --out is required");
  require(opt.bins >= 1, "diagnose: bins must be >= 1");
  ChainData data = read_chain_csv(opt.chain);
  const std::size_t rows = data.xi1.size();
  require(rows >= 2, "diagnose: chain has fewer than two rows");
  const std::size_t burn = opt.burn_in == kDefaultBurnIn ? rows / 2 : opt.burn_in;

  DiagnoseReport rep;
  rep.summary = summarize_chain(data.xi1, data.xi2, burn, opt.level);
  double acc = 0.0;
  for (std::uint8_t v : data.accepted) acc += v;
  rep.acceptance_rate = acc / double(rows);
  write_chain_diagnostics(opt.out, data.xi1, data.xi2, burn, opt.bins, opt.max_lag, rep.summary,
                          rep.acceptance_rate);
  return rep;
}

// ---------------------------------------------------------------------------
// reproduce: canned studies with side-by-side baseline comparisons. Baseline
// numbers are prior results for the same configurations; times are
// hardware-specific and only meaningful as ratios.
// ---------------------------------------------------------------------------

struct Table1Baseline {
  std::size_t n_g;
  bool reduced;
  double seconds;
  int fe;
};
inline constexpr Table1Baseline kTable1Baseline[] = {
    {32, false, 0.056, 6}, {32, true, 0.140, 8},  {64, false, 2.230, 6},
    {64, true, 0.154, 6},  {128, false, 10.45, 6}, {128, true, 0.142, 6},
};

// deim-vs-full, projection-only-vs-full, deim-vs-projection-only at n_g = 64
// with a 100/100 bundle.
inline constexpr double kStateErrorBaseline[3] = {3.2603e-6, 1.9851e-7, 3.2543e-6};

struct InverseBaseline {
  double ci1_lo, ci1_hi, ci1_mid;
  double ci2_lo, ci2_hi, ci2_mid;
  double iact1, iact2;
  double geweke_p1, geweke_p2;
};
inline constexpr InverseBaseline kInverseBaseline{0.75923, 1.18712, 0.973175, 0.08610, 0.12669,
                                                 0.106395, 10.16,  9.640,    0.99835, 0.98396};

struct ReproduceOptions {
  std::string id;  // table1 | fig2 | fig3 | inverse
  std::filesystem::path out;
  std::filesystem::path cache;  // bundle cache; default out/"cache"
  std::string precond = "direct";
  std::uint64_t seed = 1;
};

struct ReproduceReport {
  std::vector<std::string> lines;  // human-readable result rows
};

// Build (or reuse) the reference bundle for a grid. Bundles land in
// cache/ng<n_g>_k<k> and are reused verbatim when already present.
//
// Reference bundles take every trial snapshot (tau_d = 0): the adaptive
// threshold controls offline cost, but it stops far below 100 snapshots, so
// reference bases of the requested sizes need the full 626-snapshot set.
inline std::filesystem::path ensure_bundle(const std::filesystem::path& cache, std::size_t n_g,
                                           std::size_t k, std::size_t n,
                                           const std::string& precond) {
  const std::filesystem::path dir =
      cache / ("ng" + std::to_string(n_g) + "_k" + std::to_string(k));
  if (std::filesystem::exists(dir / "meta.txt")) return dir;
  BuildRomOptions bo;
  bo.n_g = n_g;
  bo.k = k;
  bo.n = n;
  bo.tau_d = 0.0;
  bo.precond = precond;
  bo.out = dir;
  run_build_rom(bo);
  return dir;
}

inline ReproduceReport reproduce_table1(const ReproduceOptions& opt) {
  ReproduceReport rep;
  std::filesystem::create_directories(opt.out);
  std::string csv = "n_g,N,model,k,n,seconds,outer,fe,total_inner,baseline_seconds,baseline_fe\n";

  for (std::size_t n_g : {std::size_t{32}, std::size_t{64}, std::size_t{128}}) {
    const std::filesystem::path bdir = ensure_bundle(opt.cache, n_g, 100, 100, opt.precond);
    FullModel m(n_g);
    PoissonSolver minv(m.grid, m.a, parse_precond(opt.precond));
    const Parameter xi{};

    auto best_of_3 = [&](auto&& solve_once) {
      SolveRecord rec;
      std::vector<double> times;
      for (int rep3 = 0; rep3 < 3; ++rep3) {
        rec = solve_once();
        times.push_back(rec.seconds);
      }
      rec.seconds = detail::median(times);
      return rec;
    };

    NewtonOptions no;
    no.step = StepMethod::gmres_fd;
    SolveRecord full = best_of_3([&] {
      PreconditionedFullSystem sys(m, minv, xi);
      return timed_solve(sys, m.size(), no);
    });

    LoadedBundle b = load_bundle(bdir);
    PodBasis pod;
    pod.q = std::move(b.q);
    DeimInterpolant interp = interpolant_from_parts(std::move(b.v), std::move(b.p));
    ReducedSystem red = build_reduced_system(m, pod, interp, &minv);
    SolveRecord deim = best_of_3([&] {
      DeimSystem sys(red, xi, /*preconditioned=*/true);
      return timed_solve(sys, red.k(), no);
    });

    auto emit = [&](const char* model, std::size_t k, std::size_t n, const SolveRecord& r,
                    bool reduced) {
      const Table1Baseline* base = nullptr;
      for (const auto& row : kTable1Baseline)
        if (row.n_g == n_g && row.reduced == reduced) base = &row;
      csv += std::to_string(n_g) + "," + std::to_string(m.size()) + "," + model + "," +
             std::to_string(k) + "," + std::to_string(n) + "," + detail::format_seconds(r.seconds) +
             "," + std::to_string(r.outer) + "," + std::to_string(r.fe) + "," +
             std::to_string(r.total_inner) + "," + detail::format_g17(base->seconds) + "," +
             std::to_string(base->fe) + "\n";
      rep.lines.push_back("N=" + std::to_string(m.size()) + " " + model + ": " +
                          detail::format_seconds(r.seconds) + " s, outer " +
                          std::to_string(r.outer) + ", fe " + std::to_string(r.fe) +
                          "  (baseline " + detail::format_g17(base->seconds) + " s, fe " +
                          std::to_string(base->fe) + ")");
    };
    emit("full", 0, 0, full, false);
    emit("deim", red.k(), red.n(), deim, true);
  }
  detail::write_file_bytes(opt.out / "table1.csv", csv);

  // Three-way state comparison at n_g = 64 with the cached bundle.
  ForwardOptions fo;
  fo.n_g = 64;
  fo.model = "all";
  fo.precond = opt.precond;
  fo.bundle = opt.cache / "ng64_k100";
  fo.out = opt.out / "forward64";
  ForwardReport fr = run_forward(fo);
  std::string ecsv = "quantity,measured,baseline\n";
  ecsv += "rel_deim," + detail::format_g17(fr.rel_deim) + "," +
          detail::format_g17(kStateErrorBaseline[0]) + "\n";
  ecsv += "rel_redb," + detail::format_g17(fr.rel_redb) + "," +
          detail::format_g17(kStateErrorBaseline[1]) + "\n";
  ecsv += "rel_dr," + detail::format_g17(fr.rel_dr) + "," +
          detail::format_g17(kStateErrorBaseline[2]) + "\n";
  detail::write_file_bytes(opt.out / "errors.csv", ecsv);
  rep.lines.push_back("N=4096 rel_deim " + detail::format_g17(fr.rel_deim) + " (baseline " +
                      detail::format_g17(kStateErrorBaseline[0]) + ")");
  rep.lines.push_back("N=4096 rel_redb " + detail::format_g17(fr.rel_redb) + " (baseline " +
                      detail::format_g17(kStateErrorBaseline[1]) + ")");
  rep.lines.push_back("N=4096 rel_dr " + detail::format_g17(fr.rel_dr) + " (baseline " +
                      detail::format_g17(kStateErrorBaseline[2]) + ")");
  rep.lines.push_back("wrote " + (opt.out / "table1.csv").string() + ", " +
                      (opt.out / "errors.csv").string());
  return rep;
}

// Error-indicator sweep over the basis size. Snapshots come from an
// accept-all acquisition over the trial grid, so every test point is also a
// training point and the indicators measure pure basis truncation error.

struct BasisSweepRow {
  std::size_t k = 0;      // requested size (state and interpolation alike)
  std::size_t k_eff = 0;  // after clamping to the snapshot ranks
  std::size_t n_eff = 0;
  double max_deim = 0.0, mean_deim = 0.0;
  double max_pg = 0.0, mean_pg = 0.0;
  std::size_t fail_deim = 0, fail_pg = 0;
};

struct BasisSweepResult {
  std::size_t snapshot_count = 0;
  std::size_t rank_u = 0, rank_f = 0;
  std::vector<BasisSweepRow> rows;
};

inline BasisSweepResult basis_error_sweep(std::size_t n_g, const std::vector<std::size_t>& ks,
                                          const std::string& precond, std::uint64_t seed,
                                          std::size_t n_trial = 625) {
  FullModel m(n_g);
  PoissonSolver minv(m.grid, m.a, parse_precond(precond));
  AcquisitionOptions ao;
  ao.n_trial = n_trial;
  ao.tau_d = 0.0;  // accept everything: the snapshot set covers the full grid
  ao.seed = seed;
  AcquisitionResult acq = acquire_snapshots(m, minv, ao);

  BasisSweepResult out;
  out.snapshot_count = acq.snapshots_u.cols();
  ThinSvd svd_u = thin_svd(acq.snapshots_u);
  out.rank_u = numerical_rank(svd_u.sigma, acq.snapshots_u.rows(), acq.snapshots_u.cols());
  ThinSvd svd_f = thin_svd(acq.snapshots_f);
  out.rank_f = numerical_rank(svd_f.sigma, acq.snapshots_f.rows(), acq.snapshots_f.cols());
  const DenseMatrix v_full = leading_columns(svd_f.u, out.rank_f);
  const std::vector<std::size_t> p_full = deim_points(v_full);
  const std::vector<Parameter> pts = trial_points(ao);

  for (std::size_t k : ks) {
    BasisSweepRow row;
    row.k = k;
    row.k_eff = std::min(k, out.rank_u);
    row.n_eff = std::min(k, out.rank_f);
    PodBasis pod;
    pod.q = leading_columns(svd_u.u, row.k_eff);
    DeimInterpolant interp = truncate_interpolant(v_full, p_full, row.n_eff);
    ReducedSystem red = build_reduced_system(m, pod, interp);

    NewtonOptions no;
    no.step = StepMethod::dense_lu;
    no.tau_scale = 1e-2;
    double sum_d = 0.0, sum_g = 0.0;
    for (const Parameter& p : pts) {
      {
        DeimSystem sys(red, p, /*preconditioned=*/false);
        NewtonResult r = newton_solve(sys, Vector(red.k(), 0.0), ForcingConfig{}, no);
        if (!r.converged) {
          ++row.fail_deim;
        } else {
          const double e = error_indicator(m, red, r.u, p);
          row.max_deim = std::max(row.max_deim, e);
          sum_d += e;
        }
      }
      {
        PodGalerkinSystem sys(m, red, p);
        NewtonResult r = newton_solve(sys, Vector(red.k(), 0.0), ForcingConfig{}, no);
        if (!r.converged) {
          ++row.fail_pg;
        } else {
          const double e = error_indicator(m, red, r.u, p);
          row.max_pg = std::max(row.max_pg, e);
          sum_g += e;
        }
      }
    }
    const double cnt_d = double(pts.size() - row.fail_deim);
    const double cnt_g = double(pts.size() - row.fail_pg);
    row.mean_deim = cnt_d > 0 ? sum_d / cnt_d : 0.0;
    row.mean_pg = cnt_g > 0 ? sum_g / cnt_g : 0.0;
    out.rows.push_back(row);
  }
  return out;
}

inline ReproduceReport reproduce_fig2(const ReproduceOptions& opt) {
  ReproduceReport rep;
  std::filesystem::create_directories(opt.out);
  const BasisSweepResult sweep =
      basis_error_sweep(32, {5, 10, 20, 50, 100, 150, 200}, opt.precond, opt.seed);

  rep.lines.push_back("snapshots " + std::to_string(sweep.snapshot_count) + ", state rank " +
                      std::to_string(sweep.rank_u) + ", reaction rank " +
                      std::to_string(sweep.rank_f));
  std::string csv = "k,k_eff,n_eff,max_deim,mean_deim,fail_deim,max_pg,mean_pg,fail_pg\n";
  for (const BasisSweepRow& r : sweep.rows) {
    csv += std::to_string(r.k) + "," + std::to_string(r.k_eff) + "," + std::to_string(r.n_eff) +
           "," + detail::format_g17(r.max_deim) + "," + detail::format_g17(r.mean_deim) + "," +
           std::to_string(r.fail_deim) + "," + detail::format_g17(r.max_pg) + "," +
           detail::format_g17(r.mean_pg) + "," + std::to_string(r.fail_pg) + "\n";
    char line[160];
    std::snprintf(line, sizeof line, "k=%3zu (eff %3zu/%3zu): max indicator deim %.3e, pg %.3e",
                  r.k, r.k_eff, r.n_eff, r.max_deim, r.max_pg);
    rep.lines.push_back(line);
  }
  detail::write_file_bytes(opt.out / "fig2.csv", csv);
  rep.lines.push_back("wrote " + (opt.out / "fig2.csv").string());
  return rep;
}

// Shared posterior study: default bundle at the given grid, synthesized data
// at the canonical true parameters, 20000-step adaptive chain, half burn-in.
inline McmcReport reproduce_chain_run(const ReproduceOptions& opt, std::size_t n_g) {
  McmcOptions mo;
  mo.n_g = n_g;
  mo.model = "deim";
  mo.bundle = ensure_bundle(opt.cache, n_g, 100, 100, opt.precond);
  mo.seed = opt.seed;
  mo.precond = opt.precond;
  mo.out = opt.out;
  return run_mcmc(mo);
}

inline ReproduceReport reproduce_fig3(const ReproduceOptions& opt) {
  ReproduceReport rep;
  McmcReport mr = reproduce_chain_run(opt, 64);
  ChainSummary cs = summarize_chain(mr.chain.xi1, mr.chain.xi2, mr.burn_used);
  write_chain_diagnostics(opt.out, mr.chain.xi1, mr.chain.xi2, mr.burn_used, 40, 100, cs,
                          mr.chain.acceptance_rate);
  char line[200];
  std::snprintf(line, sizeof line, "posterior means (%.5f, %.5f), acceptance %.3f, chain %.1f s",
                cs.xi1.mean, cs.xi2.mean, mr.chain.acceptance_rate, mr.seconds_chain);
  rep.lines.push_back(line);
  rep.lines.push_back("wrote chain.csv, report.txt, acf.csv, hist_xi1.csv, hist_xi2.csv, "
                      "scatter.csv under " +
                      opt.out.string());
  return rep;
}

inline ReproduceReport reproduce_inverse(const ReproduceOptions& opt) {
  ReproduceReport rep;
  McmcReport mr = reproduce_chain_run(opt, 64);
  ChainSummary cs = summarize_chain(mr.chain.xi1, mr.chain.xi2, mr.burn_used);
  write_chain_diagnostics(opt.out, mr.chain.xi1, mr.chain.xi2, mr.burn_used, 40, 100, cs,
                          mr.chain.acceptance_rate);

  const InverseBaseline& b = kInverseBaseline;
  std::string csv = "quantity,measured,baseline\n";
  auto row = [&](const char* q, double measured, double baseline) {
    csv += std::string(q) + "," + detail::format_g17(measured) + "," +
           detail::format_g17(baseline) + "\n";
  };
  row("ci_xi1_lo", cs.xi1.ci.lo, b.ci1_lo);
  row("ci_xi1_hi", cs.xi1.ci.hi, b.ci1_hi);
  row("ci_xi1_mid", cs.xi1.ci.midpoint, b.ci1_mid);
  row("ci_xi2_lo", cs.xi2.ci.lo, b.ci2_lo);
  row("ci_xi2_hi", cs.xi2.ci.hi, b.ci2_hi);
  row("ci_xi2_mid", cs.xi2.ci.midpoint, b.ci2_mid);
  row("iact_xi1", cs.xi1.iact, b.iact1);
  row("iact_xi2", cs.xi2.iact, b.iact2);
  row("geweke_p_xi1", cs.xi1.geweke_ok ? cs.xi1.geweke.p : -1.0, b.geweke_p1);
  row("geweke_p_xi2", cs.xi2.geweke_ok ? cs.xi2.geweke.p : -1.0, b.geweke_p2);
  detail::write_file_bytes(opt.out / "comparison.csv", csv);

  char line[220];
  std::snprintf(line, sizeof line,
                "xi1: mean %.5f, 95%% ci (%.5f, %.5f) mid %.5f  [baseline (%.5f, %.5f) mid %.5f]",
                cs.xi1.mean, cs.xi1.ci.lo, cs.xi1.ci.hi, cs.xi1.ci.midpoint, b.ci1_lo, b.ci1_hi,
                b.ci1_mid);
  rep.lines.push_back(line);
  std::snprintf(line, sizeof line,
                "xi2: mean %.5f, 95%% ci (%.5f, %.5f) mid %.5f  [baseline (%.5f, %.5f) mid %.5f]",
                cs.xi2.mean, cs.xi2.ci.lo, cs.xi2.ci.hi, cs.xi2.ci.midpoint, b.ci2_lo, b.ci2_hi,
                b.ci2_mid);
  rep.lines.push_back(line);
  std::snprintf(line, sizeof line, "iact (%.3f, %.3f) [baseline (%.3f, %.3f)]", cs.xi1.iact,
                cs.xi2.iact, b.iact1, b.iact2);
  rep.lines.push_back(line);
  std::snprintf(line, sizeof line, "geweke p (%.5f, %.5f) [baseline (%.5f, %.5f)]",
                cs.xi1.geweke_ok ? cs.xi1.geweke.p : -1.0,
                cs.xi2.geweke_ok ? cs.xi2.geweke.p : -1.0, b.geweke_p1, b.geweke_p2);
  rep.lines.push_back(line);
  std::snprintf(line, sizeof line, "chain %.1f s (%zu steps, %zu burn-in)", mr.seconds_chain,
                mr.chain.size(), mr.burn_used);
  rep.lines.push_back(line);
  rep.lines.push_back("wrote " + (opt.out / "comparison.csv").string());
  return rep;
}

inline ReproduceReport run_reproduce(const ReproduceOptions& opt_in) {
  ReproduceOptions opt = opt_in;
  require(!opt.out.empty(), "reproduce: --out is required");
  if (opt.cache.empty()) opt.cache = opt.out / "cache";
  if (opt.id == "table1") return reproduce_table1(opt);
  if (opt.id == "fig2") return reproduce_fig2(opt);
  if (opt.id == "fig3") return reproduce_fig3(opt);
  if (opt.id == "inverse") return reproduce_inverse(opt);
  throw std::invalid_argument("unknown reproduce id '" + opt.id +
                              "' (expected table1, fig2, fig3, or inverse)");
}

}  // namespace rombayes

#endif  // ROMBAYES_WORKFLOWS_HPP
