// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

// follmer: run Follmer-flow and MCMC sampling experiments.
//
//   follmer list-examples
//   follmer sample --example 4 --sampler follmer_closed --n 20000 --out runs/ex4
//   follmer sweep  --example 1 --axis K --values 5,20,80 --out runs/k_sweep

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

#include "follmer/follmer.hpp"

namespace {

struct Options {
  follmer::RunConfig run;
  std::string sampler = "follmer_closed";
  std::string grid = "uniform";
  std::string mixture;
  std::string out;
  double precond_sigma = 0.0;
  std::string axis;
  std::vector<double> values;
};

void add_run_flags(CLI::App& cmd, Options& o) {
  cmd.add_option("--example", o.run.example, "Benchmark example id (1-11)")
      ->check(CLI::Range(1, follmer::kExampleCount));
  cmd.add_option("--dim", o.run.example_dim, "Dimension of example 11")->check(CLI::PositiveNumber);
  cmd.add_option("--mixture", o.mixture, "Mixture JSON file (overrides --example)")
      ->check(CLI::ExistingFile);
  cmd.add_option("--sampler", o.sampler,
                 "follmer_closed, follmer_mc, mh, tula, tmala, hybrid_mh, hybrid_tula, hybrid_tmala");
  cmd.add_option("--k", o.run.flow.steps, "Euler steps K")->check(CLI::PositiveNumber);
  cmd.add_option("--m", o.run.flow.mc_samples, "Monte Carlo draws M per velocity evaluation");
  cmd.add_option("--eps", o.run.flow.epsilon, "Time truncation epsilon");
  cmd.add_option("--grid", o.grid, "Time grid: uniform or exp")
      ->check(CLI::IsMember({"uniform", "exp"}));
  cmd.add_option("--n", o.run.n, "Number of samples")->check(CLI::PositiveNumber);
  cmd.add_option("--seed", o.run.seed, "Master seed");
  cmd.add_option("--chains", o.run.mcmc.chains, "MCMC chains")->check(CLI::PositiveNumber);
  cmd.add_option("--burn-in", o.run.mcmc.burn_in, "MCMC burn-in transitions per chain");
  cmd.add_option("--step", o.run.mcmc.step, "MCMC step size")->check(CLI::PositiveNumber);
  cmd.add_option("--precond-sigma", o.precond_sigma,
                 "Preconditioner N(0, sigma^2 I) instead of the registry default")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--out", o.out, "Output directory")->required();
  cmd.add_option("--traj", o.run.trajectories, "Particles whose trajectories are recorded");
}

follmer::RunConfig finalize(const Options& o) {
  follmer::RunConfig cfg = o.run;
  cfg.sampler = follmer::parse_sampler(o.sampler);
  cfg.flow.grid = follmer::parse_grid_scheme(o.grid);
  if (!o.mixture.empty()) cfg.mixture_file = o.mixture;
  if (o.precond_sigma > 0.0) cfg.precond_sigma = o.precond_sigma;
  cfg.out_dir = o.out;
  return cfg;
}

void print_summary(const follmer::RunResult& r) {
  std::cout << std::setprecision(5) << "adj_w2=" << r.metrics.adj_w2
            << " adj_mmd=" << r.metrics.adj_mmd << " modes=" << r.coverage.covered << "/"
            << r.coverage.counts.size() << " time=" << r.wall_seconds << "s\n";
}

void list_examples() {
  for (int id = 1; id <= follmer::kExampleCount; ++id) {
    const follmer::ExampleSpec spec = follmer::example_registry(id);
    const double sigma = std::sqrt(spec.preconditioner.covariance()(0, 0));
    std::cout << std::setw(2) << id << "  d=" << spec.dim << "  modes=" << std::setw(2)
              << spec.mixture.size() << "  precond=N(0, " << sigma << "^2 I)  " << spec.notes
              << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Follmer flow sampling experiments"};
  app.require_subcommand(1);

  Options sample_opts, sweep_opts;
  auto* list_cmd = app.add_subcommand("list-examples", "List the benchmark targets");
  auto* sample_cmd = app.add_subcommand("sample", "Run one sampler and write samples and report");
  add_run_flags(*sample_cmd, sample_opts);
  auto* sweep_cmd = app.add_subcommand("sweep", "Repeat a run over values of one parameter");
  add_run_flags(*sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--axis", sweep_opts.axis, "K, M, sigma or d")
      ->required()
      ->check(CLI::IsMember({"K", "M", "sigma", "d"}));
  sweep_cmd->add_option("--values", sweep_opts.values, "Axis values (comma separated)")
      ->required()
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list_cmd) {
      list_examples();
    } else if (*sample_cmd) {
      const follmer::RunResult r = follmer::run_experiment(finalize(sample_opts));
      print_summary(r);
    } else if (*sweep_cmd) {
      const follmer::RunConfig tmpl = finalize(sweep_opts);
      const auto result =
          follmer::sweep(tmpl, follmer::parse_sweep_axis(sweep_opts.axis), sweep_opts.values);
      for (const auto& row : result.rows) {
        std::cout << sweep_opts.axis << "=" << row.value << "  ";
        print_summary(row.result);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
