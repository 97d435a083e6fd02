// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Subcommands:
//   forward    solve the stationary problem (full and/or reduced model)
//   build-rom  acquire snapshots and write a basis bundle
//   mcmc       sample the reaction-parameter posterior
//   diagnose   summarize a stored chain
//   reproduce  canned comparison studies (table1, fig2, fig3, inverse)
// Exit codes: 0 success, 1 runtime failure (e.g. a solve did not converge),
// 2 usage or input errors (bad flags, malformed or missing files).

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rombayes/workflows.hpp"

namespace {

void echo(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::cout << "resolved configuration:\n";
  for (const auto& [k, v] : kv) std::cout << "  " << k << " = " << v << "\n";
}

std::string fmt(double v) { return rombayes::detail::format_g17(v); }

void print_solve(const char* name, const rombayes::SolveRecord& r) {
  if (!r.present) return;
  std::printf("%s: %s  outer %d, fe %llu, |G| %.3e -> %.3e  (%.4f s, %s)\n", name,
              r.converged ? "converged" : "NOT CONVERGED", r.outer,
              (unsigned long long)r.fe, r.initial_residual, r.final_residual, r.seconds,
              r.fe_convention.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear diffusion-reaction solver with reduced-order acceleration and "
               "Bayesian parameter estimation"};
  app.set_config("--config", "", "Read options from an INI file");
  app.require_subcommand(0, 1);

  rombayes::ForwardOptions fo;
  rombayes::BuildRomOptions bo;
  rombayes::McmcOptions mo;
  rombayes::DiagnoseOptions diag;
  rombayes::ReproduceOptions ro;

  std::vector<double> xi{1.0, 0.1};
  std::vector<double> xi_true{1.0, 0.1};
  std::string fo_out, fo_bundle, bo_out, mo_out, mo_bundle, mo_yobs, diag_chain, diag_out, ro_out,
      ro_cache;
  bool mo_has_burn = false, diag_has_burn = false;

  CLI::App* forward = app.add_subcommand("forward", "Solve the stationary problem");
  forward->add_option("--n-g", fo.n_g, "Interior grid points per direction")->capture_default_str();
  forward->add_option("--xi", xi, "Reaction parameters xi1 xi2")->expected(2)->capture_default_str();
  forward->add_option("--model", fo.model, "full | deim | pod-galerkin | all")
      ->check(CLI::IsMember({"full", "deim", "pod-galerkin", "all"}))
      ->capture_default_str();
  forward->add_option("--precond", fo.precond, "Diffusion preconditioner: direct | multigrid")
      ->check(CLI::IsMember({"direct", "multigrid"}))
      ->capture_default_str();
  forward->add_option("--step", fo.step, "Krylov correction step: fd | analytic")
      ->check(CLI::IsMember({"fd", "analytic"}))
      ->capture_default_str();
  forward->add_option("--bundle", fo_bundle, "Basis bundle directory (reduced models)");
  forward->add_option("--k", fo.k, "Truncate the state basis (0 = keep all)")
      ->capture_default_str();
  forward->add_option("--n", fo.n, "Truncate the interpolation basis (0 = keep all)")
      ->capture_default_str();
  forward->add_option("--out", fo_out, "Artifact directory")->required();

  CLI::App* buildrom = app.add_subcommand("build-rom", "Acquire snapshots and write a basis bundle");
  buildrom->add_option("--n-g", bo.n_g, "Interior grid points per direction")
      ->capture_default_str();
  buildrom->add_option("--k", bo.k, "State basis size (clamped to the snapshot rank)")
      ->capture_default_str();
  buildrom->add_option("--n", bo.n, "Interpolation basis size (clamped to the snapshot rank)")
      ->capture_default_str();
  buildrom->add_option("--n-trial", bo.n_trial, "Trial parameter points")->capture_default_str();
  buildrom->add_option("--tau-d", bo.tau_d, "Acceptance threshold on the error indicator (<= 0 accepts all)")
      ->capture_default_str();
  buildrom->add_option("--seed", bo.seed, "RNG seed")->capture_default_str();
  buildrom->add_option("--sampling", bo.sampling, "Trial point layout: grid | random")
      ->check(CLI::IsMember({"grid", "random"}))
      ->capture_default_str();
  buildrom->add_option("--precond", bo.precond, "Diffusion preconditioner: direct | multigrid")
      ->check(CLI::IsMember({"direct", "multigrid"}))
      ->capture_default_str();
  buildrom->add_option("--out", bo_out, "Bundle directory")->required();

  CLI::App* mcmc = app.add_subcommand("mcmc", "Sample the reaction-parameter posterior");
  mcmc->add_option("--n-g", mo.n_g, "Interior grid points per direction")->capture_default_str();
  mcmc->add_option("--model", mo.model, "Forward map: deim | full")
      ->check(CLI::IsMember({"deim", "full"}))
      ->capture_default_str();
  mcmc->add_option("--bundle", mo_bundle, "Basis bundle directory (deim model)");
  mcmc->add_option("--y-obs", mo_yobs, "Observation vector file; omitted = synthesize");
  mcmc->add_option("--xi-true", xi_true, "True parameters for synthesized data")
      ->expected(2)
      ->capture_default_str();
  mcmc->add_option("--sigma", mo.sigma, "Observation noise standard deviation")
      ->capture_default_str();
  mcmc->add_option("--M,--steps", mo.m, "Chain length")->capture_default_str();
  mcmc->add_option("--burn-in", mo.burn_in, "Burn-in for the summary means (default M/2)")
      ->each([&](const std::string&) { mo_has_burn = true; });
  mcmc->add_option("--stride", mo.stride, "Proposal covariance refresh period")
      ->capture_default_str();
  mcmc->add_option("--epsilon", mo.epsilon, "Covariance ridge")->capture_default_str();
  mcmc->add_option("--proposal-scale", mo.proposal_scale, "Proposal covariance scale factor")
      ->capture_default_str();
  mcmc->add_flag("--jacobian-correction", mo.jacobian_correction,
                 "Correct the lognormal random-walk asymmetry");
  mcmc->add_option("--seed", mo.seed, "RNG seed")->capture_default_str();
  mcmc->add_option("--precond", mo.precond, "Diffusion preconditioner: direct | multigrid")
      ->check(CLI::IsMember({"direct", "multigrid"}))
      ->capture_default_str();
  mcmc->add_option("--out", mo_out, "Artifact directory")->required();

  CLI::App* diagnose = app.add_subcommand("diagnose", "Summarize a stored chain");
  diagnose->add_option("--chain", diag_chain, "chain.csv to read")->required();
  diagnose->add_option("--burn-in", diag.burn_in, "Samples to drop (default: half)")
      ->each([&](const std::string&) { diag_has_burn = true; });
  diagnose->add_option("--bins", diag.bins, "Histogram bins")->capture_default_str();
  diagnose->add_option("--level", diag.level, "Credible-interval level")->capture_default_str();
  diagnose->add_option("--max-lag", diag.max_lag, "Autocorrelation lags written")
      ->capture_default_str();
  diagnose->add_option("--out", diag_out, "Artifact directory")->required();

  CLI::App* reproduce = app.add_subcommand("reproduce", "Canned comparison studies");
  reproduce->add_option("id", ro.id, "table1 | fig2 | fig3 | inverse")
      ->required()
      ->check(CLI::IsMember({"table1", "fig2", "fig3", "inverse"}));
  reproduce->add_option("--out", ro_out, "Artifact directory")->required();
  reproduce->add_option("--cache", ro_cache, "Bundle cache directory (default <out>/cache)");
  reproduce->add_option("--precond", ro.precond, "Diffusion preconditioner: direct | multigrid")
      ->check(CLI::IsMember({"direct", "multigrid"}))
      ->capture_default_str();
  reproduce->add_option("--seed", ro.seed, "RNG seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (app.get_subcommands().empty()) {
    std::cout << app.help();
    return 2;
  }

  try {
    if (forward->parsed()) {
      fo.xi = {xi[0], xi[1]};
      fo.bundle = fo_bundle;
      fo.out = fo_out;
      echo({{"command", "forward"},
            {"n_g", std::to_string(fo.n_g)},
            {"xi", fmt(fo.xi.xi1) + " " + fmt(fo.xi.xi2)},
            {"model", fo.model},
            {"precond", fo.precond},
            {"step", fo.step},
            {"bundle", fo_bundle.empty() ? "(none)" : fo_bundle},
            {"k", std::to_string(fo.k)},
            {"n", std::to_string(fo.n)},
            {"out", fo_out}});
      rombayes::ForwardReport rep = rombayes::run_forward(fo);
      print_solve("full", rep.full);
      print_solve("deim", rep.deim);
      print_solve("pod-galerkin", rep.pg);
      if (rep.rel_deim >= 0.0) std::printf("rel_deim = %.6e\n", rep.rel_deim);
      if (rep.rel_redb >= 0.0) std::printf("rel_redb = %.6e\n", rep.rel_redb);
      if (rep.rel_dr >= 0.0) std::printf("rel_dr = %.6e\n", rep.rel_dr);
      bool all_ok = true;
      for (const auto* r : {&rep.full, &rep.deim, &rep.pg})
        if (r->present && !r->converged) all_ok = false;
      if (!all_ok) {
        std::cerr << "error: a solve did not converge\n";
        return 1;
      }
    } else if (buildrom->parsed()) {
      bo.out = bo_out;
      echo({{"command", "build-rom"},
            {"n_g", std::to_string(bo.n_g)},
            {"k", std::to_string(bo.k)},
            {"n", std::to_string(bo.n)},
            {"n_trial", std::to_string(bo.n_trial)},
            {"tau_d", fmt(bo.tau_d)},
            {"seed", std::to_string(bo.seed)},
            {"sampling", bo.sampling},
            {"precond", bo.precond},
            {"out", bo_out}});
      rombayes::BuildRomReport rep = rombayes::run_build_rom(bo);
      std::printf("bundle written to %s\n", rep.bundle_dir.string().c_str());
      std::printf("N %zu, snapshots %zu (accepted %zu, full-solve failures %zu, trials %zu)\n",
                  rep.full_dim, rep.snapshot_count, rep.accepted, rep.full_failures,
                  rep.effective_trials);
      std::printf("k %zu (rank %zu), n %zu (rank %zu)\n", rep.k, rep.rank_u, rep.n, rep.rank_f);
      std::printf("acquisition %.2f s, total %.2f s\n", rep.seconds_acquire, rep.seconds_total);
    } else if (mcmc->parsed()) {
      if (!mo_has_burn) mo.burn_in = rombayes::kDefaultBurnIn;
      mo.xi_true = {xi_true[0], xi_true[1]};
      mo.bundle = mo_bundle;
      mo.y_obs = mo_yobs;
      mo.out = mo_out;
      echo({{"command", "mcmc"},
            {"n_g", std::to_string(mo.n_g)},
            {"model", mo.model},
            {"bundle", mo_bundle.empty() ? "(none)" : mo_bundle},
            {"y_obs", mo_yobs.empty() ? "(synthesize)" : mo_yobs},
            {"xi_true", fmt(mo.xi_true.xi1) + " " + fmt(mo.xi_true.xi2)},
            {"sigma", fmt(mo.sigma)},
            {"M", std::to_string(mo.m)},
            {"burn_in", mo_has_burn ? std::to_string(mo.burn_in) : "(M/2)"},
            {"stride", std::to_string(mo.stride)},
            {"epsilon", fmt(mo.epsilon)},
            {"proposal_scale", fmt(mo.proposal_scale)},
            {"jacobian_correction", mo.jacobian_correction ? "1" : "0"},
            {"seed", std::to_string(mo.seed)},
            {"precond", mo.precond},
            {"out", mo_out}});
      rombayes::McmcReport rep = rombayes::run_mcmc(mo);
      std::printf("chain: %zu steps, acceptance %.3f, forward failures %llu\n", rep.chain.size(),
                  rep.chain.acceptance_rate, (unsigned long long)rep.chain.forward_failures);
      std::printf("posterior means after burn-in %zu: (%.6f, %.6f)\n", rep.burn_used, rep.mean_xi1,
                  rep.mean_xi2);
      std::printf("chain %.2f s, total %.2f s; wrote %s\n", rep.seconds_chain, rep.seconds_total,
                  rep.chain_path.string().c_str());
    } else if (diagnose->parsed()) {
      if (!diag_has_burn) diag.burn_in = rombayes::kDefaultBurnIn;
      diag.chain = diag_chain;
      diag.out = diag_out;
      echo({{"command", "diagnose"},
            {"chain", diag_chain},
            {"burn_in", diag_has_burn ? std::to_string(diag.burn_in) : "(half)"},
            {"bins", std::to_string(diag.bins)},
            {"level", fmt(diag.level)},
            {"max_lag", std::to_string(diag.max_lag)},
            {"out", diag_out}});
      rombayes::DiagnoseReport rep = rombayes::run_diagnose(diag);
      const rombayes::ChainSummary& cs = rep.summary;
      std::printf("rows %zu, burn-in %zu, used %zu, acceptance %.3f\n", cs.rows, cs.burn, cs.used,
                  rep.acceptance_rate);
      auto comp = [](const char* name, const rombayes::ComponentSummary& c) {
        std::printf("%s: mean %.6f, sd %.6f, ci (%.6f, %.6f) mid %.6f, iact %.3f", name, c.mean,
                    c.sd, c.ci.lo, c.ci.hi, c.ci.midpoint, c.iact);
        if (c.geweke_ok)
          std::printf(", geweke z %.3f p %.5f\n", c.geweke.z, c.geweke.p);
        else
          std::printf(", geweke n/a\n");
      };
      comp("xi1", cs.xi1);
      comp("xi2", cs.xi2);
    } else if (reproduce->parsed()) {
      ro.out = ro_out;
      ro.cache = ro_cache;
      echo({{"command", "reproduce"},
            {"id", ro.id},
            {"out", ro_out},
            {"cache", ro_cache.empty() ? "(<out>/cache)" : ro_cache},
            {"precond", ro.precond},
            {"seed", std::to_string(ro.seed)}});
      rombayes::ReproduceReport rep = rombayes::run_reproduce(ro);
      for (const std::string& line : rep.lines) std::cout << line << "\n";
    }
  } catch (const rombayes::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
