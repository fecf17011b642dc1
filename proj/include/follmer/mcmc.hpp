// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Baseline MCMC samplers (random-walk Metropolis-Hastings, tamed ULA, tamed
// MALA) and the Follmer-flow warm start for them.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "follmer/core.hpp"
#include "follmer/densities.hpp"
#include "follmer/flow.hpp"
#include "follmer/parallel.hpp"
#include "follmer/rng.hpp"
#include "follmer/sample_batch.hpp"

namespace follmer {

enum class McmcVariant { mh, tula, tmala };

inline std::string to_string(McmcVariant v) {
  switch (v) {
    case McmcVariant::mh: return "mh";
    case McmcVariant::tula: return "tula";
    case McmcVariant::tmala: return "tmala";
  }
  return "unknown";
}

struct McmcConfig {
  McmcVariant variant = McmcVariant::mh;
  double step = 0.2;
  std::size_t burn_in = 10000;
  std::size_t chains = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step))
      throw std::invalid_argument("McmcConfig: step must be positive");
    if (chains < 1) throw std::invalid_argument("McmcConfig: chains must be at least 1");
  }
};

/// Chain position with cached -U(position) and, for Langevin moves, grad U.
struct ChainState {
  Vector position;
  double log_density_unnorm = 0.0;
  Vector gradient;  // empty until a Langevin move needs it
};

inline constexpr double kFiniteDifferenceStep = 1e-5;

/// grad U from the target, or central finite differences when it has none.
inline Vector potential_gradient(const Target& target, const VectorRef& x) {
  if (target.has_gradient()) return target.grad_neg_log_density(x);
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = probe(i);
    probe(i) = xi + kFiniteDifferenceStep;
    const double up = target.neg_log_density(probe);
    probe(i) = xi - kFiniteDifferenceStep;
    const double down = target.neg_log_density(probe);
    probe(i) = xi;
    g(i) = (up - down) / (2.0 * kFiniteDifferenceStep);
  }
  return g;
}

inline ChainState make_chain_state(const Target& target, const VectorRef& x) {
  require_dim(x.size(), target.dim(), "make_chain_state");
  return ChainState{x, -target.neg_log_density(x), Vector()};
}

/// min(1, exp(log_ratio)); NaN counts as rejection.
inline double metropolis_acceptance(double log_ratio) {
  if (std::isnan(log_ratio)) return 0.0;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

/// b / (1 + step |b|) with b = -grad U. Its step-scaled norm is below 1.
inline Vector tamed_drift(const VectorRef& grad, double step) {
  const Vector b = -grad;
  return b / (1.0 + step * b.norm());
}

namespace detail {

inline bool accept(double log_ratio, Rng& rng) {
  const double a = metropolis_acceptance(log_ratio);
  return a >= 1.0 || rng.uniform() < a;
}

inline const Vector& ensure_gradient(ChainState& s, const Target& target) {
  if (s.gradient.size() != s.position.size()) {
    s.gradient = potential_gradient(target, s.position);
    if (!s.gradient.allFinite())
      throw NumericalFailure("non-finite gradient", 0, std::nan(""), s.position);
  }
  return s.gradient;
}

// log N(to; from + step * b_t(from), 2 step I), dropping the shared constant.
inline double langevin_log_proposal(const VectorRef& to, const VectorRef& from,
                                    const VectorRef& grad_from, double step) {
  const Vector mean = from + step * tamed_drift(grad_from, step);
  return -(to - mean).squaredNorm() / (4.0 * step);
}

}  // namespace detail

/// Random-walk proposal y = x + step z, Metropolis accept/reject.
inline ChainState mh_step(ChainState state, const Target& target, double step, Rng& rng) {
  Vector z = rng.normal_vector(state.position.size());
  Vector y = state.position + step * z;
  const double lp_y = -target.neg_log_density(y);
  if (detail::accept(lp_y - state.log_density_unnorm, rng)) {
    state.position = std::move(y);
    state.log_density_unnorm = lp_y;
    state.gradient.resize(0);
  }
  return state;
}

/// x' = x + step b_t(x) + sqrt(2 step) z, always accepted.
inline ChainState tula_step(ChainState state, const Target& target, double step, Rng& rng) {
  const Vector& g = detail::ensure_gradient(state, target);
  Vector z = rng.normal_vector(state.position.size());
  Vector y = state.position + step * tamed_drift(g, step) + std::sqrt(2.0 * step) * z;
  state.log_density_unnorm = -target.neg_log_density(y);
  state.position = std::move(y);
  state.gradient.resize(0);
  return state;
}

/// log [pi(y) q(y -> x)] - log [pi(x) q(x -> y)] for the tamed Langevin
/// proposal q(a -> b) = N(b; a + step b_t(a), 2 step I).
inline double tmala_log_ratio(const VectorRef& x, double lp_x, const VectorRef& grad_x,
                              const VectorRef& y, double lp_y, const VectorRef& grad_y,
                              double step) {
  return (lp_y + detail::langevin_log_proposal(x, y, grad_y, step)) -
         (lp_x + detail::langevin_log_proposal(y, x, grad_x, step));
}

/// Tamed Langevin proposal with Metropolis-Hastings correction.
inline ChainState tmala_step(ChainState state, const Target& target, double step, Rng& rng) {
  const Vector& g = detail::ensure_gradient(state, target);
  Vector z = rng.normal_vector(state.position.size());
  Vector y = state.position + step * tamed_drift(g, step) + std::sqrt(2.0 * step) * z;
  const double lp_y = -target.neg_log_density(y);
  if (!std::isfinite(lp_y)) {
    rng.uniform();  // keep the stream layout independent of the outcome
    return state;
  }
  Vector grad_y = potential_gradient(target, y);
  if (!grad_y.allFinite()) throw NumericalFailure("non-finite gradient", 0, std::nan(""), y);
  const double log_ratio =
      tmala_log_ratio(state.position, state.log_density_unnorm, g, y, lp_y, grad_y, step);
  if (detail::accept(log_ratio, rng)) {
    state.position = std::move(y);
    state.log_density_unnorm = lp_y;
    state.gradient = std::move(grad_y);
  }
  return state;
}

inline ChainState mcmc_step(McmcVariant variant, ChainState state, const Target& target,
                            double step, Rng& rng) {
  switch (variant) {
    case McmcVariant::mh: return mh_step(std::move(state), target, step, rng);
    case McmcVariant::tula: return tula_step(std::move(state), target, step, rng);
    case McmcVariant::tmala: return tmala_step(std::move(state), target, step, rng);
  }
  return state;
}

/// Runs cfg.chains independent chains, discards burn_in transitions each and
/// keeps the next ceil(n / chains) states. Output row s comes from chain
/// s % chains. Chains start at the rows of `init`, or at N(0, I) draws.
inline SampleBatch run_chains(const McmcConfig& cfg, const Target& target,
                              const SampleBatch* init, Eigen::Index n,
                              std::size_t threads = worker_count()) {
  cfg.validate();
  if (n < 1) throw std::invalid_argument("run_chains: n must be at least 1");
  const Eigen::Index d = target.dim();
  const auto chains = static_cast<Eigen::Index>(cfg.chains);
  if (init != nullptr) {
    if (init->size() != chains)
      throw std::invalid_argument("run_chains: init must have one row per chain");
    require_dim(init->dim(), d, "run_chains init");
  }
  const Eigen::Index per_chain = (n + chains - 1) / chains;

  std::vector<Matrix> kept(cfg.chains);
  std::vector<std::size_t> accepted(cfg.chains, 0);
  parallel_for(
      cfg.chains,
      [&](std::size_t c) {
        Rng rng = Rng::stream(cfg.seed, c);
        const Vector x0 = init != nullptr ? init->row(static_cast<Eigen::Index>(c))
                                          : rng.normal_vector(d);
        ChainState state = make_chain_state(target, x0);
        for (std::size_t b = 0; b < cfg.burn_in; ++b)
          state = mcmc_step(cfg.variant, std::move(state), target, cfg.step, rng);
        Matrix& out = kept[c];
        out.resize(per_chain, d);
        for (Eigen::Index j = 0; j < per_chain; ++j) {
          const Vector before = state.position;
          state = mcmc_step(cfg.variant, std::move(state), target, cfg.step, rng);
          if (state.position != before) ++accepted[c];
          out.row(j) = state.position.transpose();
        }
      },
      threads);

  SampleBatch batch;
  batch.seed = cfg.seed;
  batch.data.resize(n, d);
  for (Eigen::Index s = 0; s < n; ++s)
    batch.data.row(s) = kept[static_cast<std::size_t>(s % chains)].row(s / chains);
  std::size_t total = 0;
  for (std::size_t a : accepted) total += a;
  batch.meta["sampler"] = to_string(cfg.variant);
  batch.meta["chains"] = std::to_string(cfg.chains);
  batch.meta["acceptance_rate"] =
      std::to_string(static_cast<double>(total) / static_cast<double>(per_chain * chains));
  return batch;
}

inline SampleBatch run_chains(const McmcConfig& cfg, const Target& target, Eigen::Index n,
                              std::size_t threads = worker_count()) {
  return run_chains(cfg, target, nullptr, n, threads);
}

/// Chain starting points from a Monte Carlo Follmer flow run.
inline SampleBatch warm_start_batch(const FlowConfig& flow_cfg, const McmcConfig& mcmc_cfg,
                                    const Target& target, const Preconditioner& pc,
                                    std::size_t threads = worker_count()) {
  if (flow_cfg.mc_samples < 1)
    throw std::invalid_argument("hybrid_sample: the warm start uses the Monte Carlo flow (M >= 1)");
  mcmc_cfg.validate();
  return follmer_sample(flow_cfg, target, pc, static_cast<Eigen::Index>(mcmc_cfg.chains),
                        threads);
}

/// MCMC chains initialized by a coarse Monte Carlo Follmer flow.
inline SampleBatch hybrid_sample(const FlowConfig& flow_cfg, const McmcConfig& mcmc_cfg,
                                 const Target& target, const Preconditioner& pc,
                                 Eigen::Index n, std::size_t threads = worker_count()) {
  const SampleBatch starts = warm_start_batch(flow_cfg, mcmc_cfg, target, pc, threads);
  SampleBatch out = run_chains(mcmc_cfg, target, &starts, n, threads);
  out.meta["sampler"] = "hybrid_" + to_string(mcmc_cfg.variant);
  out.meta["warm_start"] = starts.meta.at("config");
  return out;
}

}  // namespace follmer
