// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Experiment runner behind the `follmer` command line tool.
//
// One run draws samples with the chosen sampler, two independent ground-truth
// batches for the adjusted metrics, and writes samples.csv, report.json and
// optionally trajectories.csv into the output directory.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "follmer/densities.hpp"
#include "follmer/flow.hpp"
#include "follmer/io.hpp"
#include "follmer/mcmc.hpp"
#include "follmer/metrics.hpp"
#include "follmer/registry.hpp"

namespace follmer {

enum class SamplerKind {
  follmer_closed,
  follmer_mc,
  mh,
  tula,
  tmala,
  hybrid_mh,
  hybrid_tula,
  hybrid_tmala,
};

inline std::string to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::follmer_closed: return "follmer_closed";
    case SamplerKind::follmer_mc: return "follmer_mc";
    case SamplerKind::mh: return "mh";
    case SamplerKind::tula: return "tula";
    case SamplerKind::tmala: return "tmala";
    case SamplerKind::hybrid_mh: return "hybrid_mh";
    case SamplerKind::hybrid_tula: return "hybrid_tula";
    case SamplerKind::hybrid_tmala: return "hybrid_tmala";
  }
  return "unknown";
}

inline SamplerKind parse_sampler(const std::string& s) {
  for (auto k : {SamplerKind::follmer_closed, SamplerKind::follmer_mc, SamplerKind::mh,
                 SamplerKind::tula, SamplerKind::tmala, SamplerKind::hybrid_mh,
                 SamplerKind::hybrid_tula, SamplerKind::hybrid_tmala})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown sampler '" + s + "'");
}

inline bool is_flow(SamplerKind s) {
  return s == SamplerKind::follmer_closed || s == SamplerKind::follmer_mc;
}

inline bool is_hybrid(SamplerKind s) {
  return s == SamplerKind::hybrid_mh || s == SamplerKind::hybrid_tula ||
         s == SamplerKind::hybrid_tmala;
}

inline McmcVariant mcmc_variant(SamplerKind s) {
  switch (s) {
    case SamplerKind::mh:
    case SamplerKind::hybrid_mh: return McmcVariant::mh;
    case SamplerKind::tula:
    case SamplerKind::hybrid_tula: return McmcVariant::tula;
    case SamplerKind::tmala:
    case SamplerKind::hybrid_tmala: return McmcVariant::tmala;
    default: throw std::invalid_argument("sampler " + to_string(s) + " is not an MCMC sampler");
  }
}

struct RunConfig {
  int example = 1;
  Eigen::Index example_dim = 2;  // example 11 only
  std::optional<std::filesystem::path> mixture_file;
  SamplerKind sampler = SamplerKind::follmer_closed;
  FlowConfig flow{};
  McmcConfig mcmc{};
  Eigen::Index n = 10000;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;  // empty: nothing is written
  std::size_t trajectories = 0;
  std::optional<double> precond_sigma;
  MetricOptions metrics{};
  std::size_t threads = 0;  // 0: FOLLMER_THREADS or hardware concurrency
};

/// Seeds actually used by a run, all derived from RunConfig::seed.
struct RunSeeds {
  std::uint64_t sampler = 0;
  std::uint64_t warm_start = 0;
  std::uint64_t truth_a = 0;
  std::uint64_t truth_b = 0;
  std::uint64_t subsample = 0;

  static RunSeeds from(std::uint64_t seed) {
    return {seed, derive_seed(seed, 4), derive_seed(seed, 1), derive_seed(seed, 2),
            derive_seed(seed, 3)};
  }
};

struct RunResult {
  SampleBatch samples;
  MetricReport metrics;
  ModeCoverage coverage;
  MomentEstimates moments;
  std::array<double, 4> exact_moments{};
  RunSeeds seeds;
  double wall_seconds = 0.0;
  json report;
};

struct Problem {
  GaussianMixture mixture;
  Preconditioner preconditioner;
  std::string source;
};

inline Problem resolve_problem(const RunConfig& cfg) {
  if (cfg.mixture_file) {
    GaussianMixture gm = load_mixture_file(*cfg.mixture_file);
    const Eigen::Index d = gm.dim();
    Preconditioner pc = cfg.precond_sigma ? Preconditioner::isotropic(d, *cfg.precond_sigma)
                                          : Preconditioner::standard(d);
    return {std::move(gm), std::move(pc), cfg.mixture_file->string()};
  }
  ExampleSpec spec = example_registry(cfg.example, cfg.example_dim);
  Preconditioner pc = cfg.precond_sigma
                          ? Preconditioner::isotropic(spec.dim, *cfg.precond_sigma)
                          : spec.preconditioner;
  return {std::move(spec.mixture), std::move(pc), "example " + std::to_string(cfg.example)};
}

inline json config_to_json(const RunConfig& cfg) {
  json j;
  if (cfg.mixture_file)
    j["mixture_file"] = cfg.mixture_file->string();
  else
    j["example"] = cfg.example;
  if (!cfg.mixture_file && cfg.example == 11) j["example_dim"] = cfg.example_dim;
  j["sampler"] = to_string(cfg.sampler);
  j["n"] = cfg.n;
  j["seed"] = cfg.seed;
  j["flow"] = {{"K", cfg.flow.steps},
               {"M", cfg.flow.mc_samples},
               {"eps", cfg.flow.epsilon},
               {"grid", to_string(cfg.flow.grid)}};
  j["mcmc"] = {{"step", cfg.mcmc.step},
               {"burn_in", cfg.mcmc.burn_in},
               {"chains", cfg.mcmc.chains}};
  j["precond_sigma"] = cfg.precond_sigma ? json(*cfg.precond_sigma) : json(nullptr);
  j["trajectories"] = cfg.trajectories;
  j["metrics"] = {{"w2_cap", cfg.metrics.w2_cap}, {"mmd_cap", cfg.metrics.mmd_cap}};
  return j;
}

/// Runs one configured experiment; writes output files when out_dir is set.
inline RunResult run_experiment(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t threads = cfg.threads == 0 ? worker_count() : cfg.threads;
  const Problem problem = resolve_problem(cfg);
  const GaussianMixture& gm = problem.mixture;
  const Preconditioner& pc = problem.preconditioner;

  RunResult result;
  result.seeds = RunSeeds::from(cfg.seed);
  FlowRun flow_run;
  try {
    if (is_flow(cfg.sampler)) {
      FlowConfig fc = cfg.flow;
      fc.seed = result.seeds.sampler;
      if (cfg.sampler == SamplerKind::follmer_closed) fc.mc_samples = 0;
      if (cfg.sampler == SamplerKind::follmer_mc && fc.mc_samples == 0)
        throw std::invalid_argument("follmer_mc needs M >= 1 (--m)");
      flow_run = follmer_run(fc, gm, pc, cfg.n, cfg.trajectories, threads);
      result.samples = flow_run.samples;
    } else {
      McmcConfig mc = cfg.mcmc;
      mc.variant = mcmc_variant(cfg.sampler);
      mc.seed = result.seeds.sampler;
      if (is_hybrid(cfg.sampler)) {
        FlowConfig fc = cfg.flow;
        fc.seed = result.seeds.warm_start;
        if (fc.mc_samples == 0)
          throw std::invalid_argument(to_string(cfg.sampler) + " needs M >= 1 (--m)");
        result.samples = hybrid_sample(fc, mc, gm, pc, cfg.n, threads);
      } else {
        result.samples = run_chains(mc, gm, cfg.n, threads);
      }
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("sampler " + to_string(cfg.sampler) + " failed: " + e.what());
  }

  const SampleBatch truth_a = gm_sample(gm, cfg.n, result.seeds.truth_a);
  const SampleBatch truth_b = gm_sample(gm, cfg.n, result.seeds.truth_b);
  MetricOptions mopt = cfg.metrics;
  mopt.subsample_seed = result.seeds.subsample;
  result.metrics = adjusted_metrics(result.samples, truth_a, truth_b, mopt);
  result.coverage = mode_coverage(result.samples, gm);
  const Vector alpha = Vector::Ones(gm.dim()) / std::sqrt(static_cast<double>(gm.dim()));
  result.moments = moment_estimates(result.samples, alpha);
  result.exact_moments = exact_moments(gm, alpha);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json& r = result.report;
  r["config"] = config_to_json(cfg);
  r["target"] = problem.source;
  r["dim"] = gm.dim();
  r["seeds"] = {{"run", cfg.seed},
                {"sampler", result.seeds.sampler},
                {"warm_start", result.seeds.warm_start},
                {"truth_a", result.seeds.truth_a},
                {"truth_b", result.seeds.truth_b},
                {"subsample", result.seeds.subsample}};
  const MetricReport& m = result.metrics;
  r["metrics"] = {{"raw_w2", m.raw_w2},         {"baseline_w2", m.baseline_w2},
                  {"adj_w2", m.adj_w2},         {"raw_mmd", m.raw_mmd},
                  {"baseline_mmd", m.baseline_mmd}, {"adj_mmd", m.adj_mmd},
                  {"n_used", m.n_used}};
  r["mode_coverage"] = {{"covered", result.coverage.covered},
                        {"modes", gm.size()},
                        {"counts", result.coverage.counts}};
  json moments;
  for (std::size_t k = 0; k < 4; ++k)
    moments[MomentEstimates::names[k]] = {{"estimate", result.moments.value[k]},
                                          {"std_error", result.moments.std_error[k]},
                                          {"exact", result.exact_moments[k]}};
  r["moments"] = moments;
  r["sampler_meta"] = result.samples.meta;
  r["wall_time_s"] = result.wall_seconds;

  if (!cfg.out_dir.empty()) {
    write_samples_csv(cfg.out_dir / "samples.csv", result.samples);
    if (is_flow(cfg.sampler) && cfg.trajectories > 0)
      write_trajectories_csv(cfg.out_dir / "trajectories.csv", flow_run.trajectories,
                             flow_run.times);
    write_json_file(cfg.out_dir / "report.json", r);
  }
  return result;
}

enum class SweepAxis { K, M, sigma, d };

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::K: return "K";
    case SweepAxis::M: return "M";
    case SweepAxis::sigma: return "sigma";
    case SweepAxis::d: return "d";
  }
  return "unknown";
}

inline SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "K" || s == "k") return SweepAxis::K;
  if (s == "M" || s == "m") return SweepAxis::M;
  if (s == "sigma") return SweepAxis::sigma;
  if (s == "d") return SweepAxis::d;
  throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

struct SweepRow {
  double value = 0.0;
  RunResult result;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  bool complete = true;
};

/// Configuration for one sweep cell. Axis d switches to example 11 and, for
/// the Monte Carlo flow, to M = 200 d on the exp-warped grid.
inline RunConfig sweep_cell(const RunConfig& tmpl, SweepAxis axis, double value) {
  RunConfig cfg = tmpl;
  auto as_count = [&](const char* what) {
    if (!(value >= 1.0) || value != std::floor(value))
      throw std::invalid_argument(std::string("sweep: ") + what + " values must be positive integers");
    return static_cast<std::size_t>(value);
  };
  switch (axis) {
    case SweepAxis::K: cfg.flow.steps = as_count("K"); break;
    case SweepAxis::M: cfg.flow.mc_samples = as_count("M"); break;
    case SweepAxis::sigma:
      if (!(value > 0.0)) throw std::invalid_argument("sweep: sigma values must be positive");
      cfg.precond_sigma = value;
      break;
    case SweepAxis::d: {
      const std::size_t d = as_count("d");
      cfg.mixture_file.reset();
      cfg.example = 11;
      cfg.example_dim = static_cast<Eigen::Index>(d);
      if (cfg.sampler == SamplerKind::follmer_mc) {
        cfg.flow.mc_samples = 200 * d;
        cfg.flow.grid = GridScheme::exp_warped;
      }
      break;
    }
  }
  return cfg;
}

inline std::string sweep_csv_header() {
  std::string h =
      "value,sampler,n,K,M,raw_w2,baseline_w2,adj_w2,raw_mmd,baseline_mmd,adj_mmd,"
      "modes_covered,modes_total";
  for (const char* name : MomentEstimates::names)
    h += std::string(",") + name + "," + name + "_se," + name + "_exact";
  return h + ",wall_time_s";
}

inline std::string sweep_csv_row(double value, const RunConfig& cfg, const RunResult& r) {
  std::string s = format_double(value) + "," + to_string(cfg.sampler) + "," +
                  std::to_string(cfg.n) + "," + std::to_string(cfg.flow.steps) + "," +
                  std::to_string(cfg.flow.mc_samples);
  for (double v : {r.metrics.raw_w2, r.metrics.baseline_w2, r.metrics.adj_w2, r.metrics.raw_mmd,
                   r.metrics.baseline_mmd, r.metrics.adj_mmd})
    s += "," + format_double(v);
  s += "," + std::to_string(r.coverage.covered) + "," + std::to_string(r.coverage.counts.size());
  for (std::size_t k = 0; k < 4; ++k)
    s += "," + format_double(r.moments.value[k]) + "," + format_double(r.moments.std_error[k]) +
         "," + format_double(r.exact_moments[k]);
  return s + "," + format_double(r.wall_seconds);
}

/// One run per axis value, aggregated into <out_dir>/sweep.csv (cells write
/// their own files under <out_dir>/<axis>_<value>/). A failing cell leaves a
/// partial sweep.csv ending in an "# incomplete" line and rethrows.
inline SweepResult sweep(const RunConfig& tmpl, SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("sweep: no axis values");
  SweepResult out;
  std::string csv = sweep_csv_header() + "\n";
  auto flush = [&] {
    if (tmpl.out_dir.empty()) return;
    auto f = detail::open_output(tmpl.out_dir / "sweep.csv");
    f << csv;
    detail::finish_output(f, tmpl.out_dir / "sweep.csv");
  };
  for (double value : values) {
    try {
      RunConfig cfg = sweep_cell(tmpl, axis, value);
      if (!tmpl.out_dir.empty())
        cfg.out_dir = tmpl.out_dir / (to_string(axis) + "_" + format_double(value));
      RunResult r = run_experiment(cfg);
      csv += sweep_csv_row(value, cfg, r) + "\n";
      out.rows.push_back({value, std::move(r)});
    } catch (const std::exception& e) {
      out.complete = false;
      csv += "# incomplete: " + to_string(axis) + "=" + format_double(value) + " failed: " +
             e.what() + "\n";
      flush();
      throw;
    }
  }
  flush();
  return out;
}

}  // namespace follmer
