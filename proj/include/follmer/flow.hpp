// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Follmer flow sampler: velocity fields, time grids and Euler integration.
//
// The flow dX/dt = V(t, X) carries X_0 ~ N(mu, Sigma) to the target at t = 1.
// Integration runs on a truncated interval [eps, 1 - eps] where V is smooth.
//
//   V(t, x) = (x - mu + Sigma * grad log q_t(x)) / t
//
// with q_t the law of t X_1 + (1 - t) mu + sqrt(1 - t^2) A Z, Sigma = A A^T.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "follmer/core.hpp"
#include "follmer/densities.hpp"
#include "follmer/parallel.hpp"
#include "follmer/rng.hpp"
#include "follmer/sample_batch.hpp"

namespace follmer {

enum class GridScheme { uniform, exp_warped, custom };

inline std::string to_string(GridScheme s) {
  switch (s) {
    case GridScheme::uniform: return "uniform";
    case GridScheme::exp_warped: return "exp";
    case GridScheme::custom: return "custom";
  }
  return "unknown";
}

inline GridScheme parse_grid_scheme(const std::string& s) {
  if (s == "uniform") return GridScheme::uniform;
  if (s == "exp" || s == "exp-warped" || s == "exp_warped") return GridScheme::exp_warped;
  throw std::invalid_argument("unknown grid scheme '" + s + "'");
}

/// Strictly increasing integration nodes t_0 < ... < t_K.
class TimeGrid {
 public:
  /// Wraps explicit nodes, e.g. for integrating on the full [0, 1].
  static TimeGrid from_nodes(std::vector<double> nodes) {
    if (nodes.size() < 2) throw std::invalid_argument("TimeGrid: need at least two nodes");
    for (std::size_t k = 1; k < nodes.size(); ++k)
      if (!(nodes[k] > nodes[k - 1]))
        throw std::invalid_argument("TimeGrid: nodes must be strictly increasing");
    const double eps = nodes.front();
    return TimeGrid(std::move(nodes), eps, GridScheme::custom);
  }

  const std::vector<double>& nodes() const { return nodes_; }
  std::size_t steps() const { return nodes_.size() - 1; }
  double epsilon() const { return epsilon_; }
  GridScheme scheme() const { return scheme_; }
  double node(std::size_t k) const { return nodes_[k]; }
  double step_size(std::size_t k) const { return nodes_[k + 1] - nodes_[k]; }

 private:
  friend TimeGrid make_time_grid(std::size_t, double, GridScheme);

  TimeGrid(std::vector<double> nodes, double eps, GridScheme scheme)
      : nodes_(std::move(nodes)), epsilon_(eps), scheme_(scheme) {}

  std::vector<double> nodes_;
  double epsilon_;
  GridScheme scheme_;
};

/// K steps on [eps, 1 - eps], either uniform or warped by t = 1 - exp(-u)
/// with u uniform on [-ln(1 - eps), -ln(eps)].
inline TimeGrid make_time_grid(std::size_t steps, double epsilon, GridScheme scheme) {
  if (steps < 1) throw std::invalid_argument("make_time_grid: K must be at least 1");
  if (!(epsilon > 0.0 && epsilon < 0.5))
    throw std::domain_error("make_time_grid: epsilon must lie in (0, 0.5)");
  std::vector<double> nodes(steps + 1);
  const double K = static_cast<double>(steps);
  switch (scheme) {
    case GridScheme::uniform: {
      const double h = (1.0 - 2.0 * epsilon) / K;
      for (std::size_t k = 0; k <= steps; ++k) nodes[k] = epsilon + static_cast<double>(k) * h;
      break;
    }
    case GridScheme::exp_warped: {
      const double lo = -std::log1p(-epsilon);
      const double hi = -std::log(epsilon);
      for (std::size_t k = 0; k <= steps; ++k) {
        const double u = lo + static_cast<double>(k) * (hi - lo) / K;
        nodes[k] = -std::expm1(-u);
      }
      break;
    }
    case GridScheme::custom:
      throw std::invalid_argument("make_time_grid: use TimeGrid::from_nodes for custom grids");
  }
  nodes.front() = epsilon;
  nodes.back() = 1.0 - epsilon;
  for (std::size_t k = 1; k <= steps; ++k)
    if (!(nodes[k] > nodes[k - 1]))
      throw std::domain_error("make_time_grid: grid too fine for epsilon");
  return TimeGrid(std::move(nodes), epsilon, scheme);
}

/// Velocity V(t, x). Stochastic fields draw from the supplied stream.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual Vector eval(double t, const VectorRef& x, Rng* rng) const = 0;
  virtual bool deterministic() const = 0;
};

/// Closed-form velocity of a Gaussian mixture target.
///
/// Component i contributes p_i = N(t mu_i + (1 - t) mu, t^2 Sigma_i +
/// (1 - t^2) Sigma) and B_i = C_i^{-1} (t mu_i + (1 - t) mu - x); the weights
/// theta_i p_i(x) are normalized in log space.
inline Vector closed_form_velocity(const GaussianMixture& gm, const Preconditioner& pc,
                                   double t, const VectorRef& x) {
  if (!(t > 0.0 && t <= 1.0))
    throw std::domain_error("closed_form_velocity: t must lie in (0, 1]");
  const Eigen::Index d = gm.dim();
  require_dim(pc.dim(), d, "closed_form_velocity");
  require_dim(x.size(), d, "closed_form_velocity");

  const double t2 = t * t;
  const Vector shift = (1.0 - t) * pc.mean();
  const Matrix ref_part = (1.0 - t2) * pc.covariance();

  Vector log_terms(gm.size());
  Matrix scores(d, gm.size());
  Eigen::LLT<Matrix> llt(d);
  for (std::size_t i = 0; i < gm.size(); ++i) {
    if (gm.weights()[i] == 0.0) {
      log_terms(i) = -std::numeric_limits<double>::infinity();
      scores.col(i).setZero();
      continue;
    }
    const Gaussian& c = gm.component(i);
    llt.compute(t2 * c.covariance() + ref_part);
    if (llt.info() != Eigen::Success)
      throw NumericalFailure("interpolated covariance lost definiteness", 0, t, x);
    const Vector diff = t * c.mean() + shift - x;
    const Vector white = llt.matrixL().solve(diff);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    log_terms(i) = gm.log_weights()[i] - 0.5 * (white.squaredNorm() + log_det + d * kLog2Pi);
    scores.col(i) = llt.matrixU().solve(white);
  }
  const Vector score = scores * softmax(log_terms);
  return (x - pc.mean() + pc.covariance() * score) / t;
}

namespace detail {

// Self-normalized Stein estimator; valid for t in [0, 1).
inline Vector stein_estimate(const Target& target, const Preconditioner& pc, double t,
                             const VectorRef& x, const MatrixRef& draws) {
  const double s = std::sqrt(1.0 - t * t);
  const Vector base = t * x + (1.0 - t) * pc.mean();
  const auto A = pc.chol().triangularView<Eigen::Lower>();
  Matrix points = A * draws;
  points *= s;
  points.colwise() += base;
  const Vector weights = softmax(log_rnd_cols(target, pc, points));
  Vector out = A * (draws * weights);
  return out / s;
}

}  // namespace detail

/// Monte Carlo velocity from explicit standard normal draws (one per column).
inline Vector mc_velocity(const Target& target, const Preconditioner& pc, double t,
                          const VectorRef& x, const MatrixRef& draws) {
  if (!(t > 0.0 && t < 1.0)) throw std::domain_error("mc_velocity: t must lie in (0, 1)");
  require_dim(target.dim(), pc.dim(), "mc_velocity");
  require_dim(x.size(), pc.dim(), "mc_velocity");
  require_dim(draws.rows(), pc.dim(), "mc_velocity draws");
  if (draws.cols() < 1) throw std::invalid_argument("mc_velocity: M must be at least 1");
  return detail::stein_estimate(target, pc, t, x, draws);
}

/// Monte Carlo velocity with M fresh draws from rng.
inline Vector mc_velocity(const Target& target, const Preconditioner& pc, double t,
                          const VectorRef& x, std::size_t samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("mc_velocity: M must be at least 1");
  Matrix draws(pc.dim(), static_cast<Eigen::Index>(samples));
  rng.fill_normal(draws);
  return mc_velocity(target, pc, t, x, draws);
}

/// Limit of V(t, x) as t -> 0: E_nu[X] - mu.
inline Vector velocity_at_zero(const Target& target, const Preconditioner& pc) {
  require_dim(target.dim(), pc.dim(), "velocity_at_zero");
  const std::optional<Vector> m = target.mean();
  if (!m)
    throw UnsupportedOperation(
        "velocity_at_zero: target mean unknown; request a Monte Carlo estimate");
  return *m - pc.mean();
}

/// Importance-sampling estimate of E_nu[X] - mu with draws from N(mu, Sigma).
inline Vector velocity_at_zero(const Target& target, const Preconditioner& pc,
                               std::size_t samples, Rng& rng) {
  require_dim(target.dim(), pc.dim(), "velocity_at_zero");
  if (samples < 1) throw std::invalid_argument("velocity_at_zero: M must be at least 1");
  Matrix draws(pc.dim(), static_cast<Eigen::Index>(samples));
  rng.fill_normal(draws);
  return detail::stein_estimate(target, pc, 0.0, Vector::Zero(pc.dim()), draws);
}

class ClosedFormVelocity final : public VelocityField {
 public:
  ClosedFormVelocity(const GaussianMixture& gm, const Preconditioner& pc) : gm_(gm), pc_(pc) {
    require_dim(gm.dim(), pc.dim(), "ClosedFormVelocity");
  }
  Vector eval(double t, const VectorRef& x, Rng*) const override {
    return closed_form_velocity(gm_, pc_, t, x);
  }
  bool deterministic() const override { return true; }

 private:
  const GaussianMixture& gm_;
  const Preconditioner& pc_;
};

class MonteCarloVelocity final : public VelocityField {
 public:
  MonteCarloVelocity(const Target& target, const Preconditioner& pc, std::size_t samples)
      : target_(target), pc_(pc), samples_(samples) {
    require_dim(target.dim(), pc.dim(), "MonteCarloVelocity");
    if (samples < 1) throw std::invalid_argument("MonteCarloVelocity: M must be at least 1");
  }
  Vector eval(double t, const VectorRef& x, Rng* rng) const override {
    if (rng == nullptr)
      throw std::invalid_argument("MonteCarloVelocity: a random stream is required");
    return mc_velocity(target_, pc_, t, x, samples_, *rng);
  }
  bool deterministic() const override { return false; }
  std::size_t samples() const { return samples_; }

 private:
  const Target& target_;
  const Preconditioner& pc_;
  std::size_t samples_;
};

/// Deterministic field from a callable; handy for analytic test fields.
class FunctionVelocity final : public VelocityField {
 public:
  using Fn = std::function<Vector(double, const VectorRef&)>;
  explicit FunctionVelocity(Fn fn) : fn_(std::move(fn)) {}
  Vector eval(double t, const VectorRef& x, Rng*) const override { return fn_(t, x); }
  bool deterministic() const override { return true; }

 private:
  Fn fn_;
};

using Trajectory = std::vector<Vector>;

namespace detail {

template <typename Observer>
Vector euler_run(const VelocityField& field, const TimeGrid& grid, const VectorRef& x0,
                 Rng* rng, Observer&& observe) {
  if (!x0.allFinite()) throw std::invalid_argument("euler_integrate: non-finite initial state");
  if (!field.deterministic() && rng == nullptr)
    throw std::invalid_argument("euler_integrate: stochastic field needs a random stream");
  Vector x = x0;
  observe(x);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double t = grid.node(k);
    const Vector v = field.eval(t, x, rng);
    if (!v.allFinite()) throw NumericalFailure("non-finite velocity", k, t, x);
    x += grid.step_size(k) * v;
    observe(x);
  }
  return x;
}

}  // namespace detail

/// Explicit Euler, x_{k+1} = x_k + (t_{k+1} - t_k) V(t_k, x_k). Returns all
/// K + 1 states including x0.
inline Trajectory euler_integrate(const VelocityField& field, const TimeGrid& grid,
                                  const VectorRef& x0, Rng* rng = nullptr) {
  Trajectory path;
  path.reserve(grid.steps() + 1);
  detail::euler_run(field, grid, x0, rng, [&](const Vector& x) { path.push_back(x); });
  return path;
}

/// Final Euler state only.
inline Vector euler_endpoint(const VelocityField& field, const TimeGrid& grid,
                             const VectorRef& x0, Rng* rng = nullptr) {
  return detail::euler_run(field, grid, x0, rng, [](const Vector&) {});
}

struct FlowConfig {
  std::size_t steps = 100;       // K
  double epsilon = 1e-3;         // truncation of [0, 1]
  std::size_t mc_samples = 0;    // M; 0 selects the closed-form field
  GridScheme grid = GridScheme::uniform;
  std::uint64_t seed = 0;

  void validate() const {
    if (steps < 1) throw std::invalid_argument("FlowConfig: K must be at least 1");
    if (!(epsilon > 0.0 && epsilon < 0.5))
      throw std::domain_error("FlowConfig: epsilon must lie in (0, 0.5)");
  }

  TimeGrid time_grid() const { return make_time_grid(steps, epsilon, grid); }
};

struct FlowRun {
  SampleBatch samples;
  std::vector<Trajectory> trajectories;  // first `record` particles
  std::vector<double> times;             // grid nodes matching each trajectory
};

/// Runs the flow for n particles. Particle i uses stream (seed, i) for its
/// initial draw and all of its Monte Carlo velocity draws.
inline FlowRun follmer_run(const FlowConfig& cfg, const Target& target, const Preconditioner& pc,
                           Eigen::Index n, std::size_t record = 0,
                           std::size_t threads = worker_count()) {
  cfg.validate();
  require_dim(target.dim(), pc.dim(), "follmer_sample");
  if (n < 1) throw std::invalid_argument("follmer_sample: n must be at least 1");

  std::unique_ptr<VelocityField> field;
  std::string name;
  if (cfg.mc_samples == 0) {
    const auto* gm = dynamic_cast<const GaussianMixture*>(&target);
    if (gm == nullptr)
      throw UnsupportedOperation(
          "follmer_sample: closed-form velocity (M = 0) requires a Gaussian mixture target");
    field = std::make_unique<ClosedFormVelocity>(*gm, pc);
    name = "follmer_closed";
  } else {
    field = std::make_unique<MonteCarloVelocity>(target, pc, cfg.mc_samples);
    name = "follmer_mc";
  }

  const TimeGrid grid = cfg.time_grid();
  const std::size_t count = static_cast<std::size_t>(n);
  record = std::min(record, count);

  FlowRun run;
  run.samples.data.resize(n, pc.dim());
  run.samples.seed = cfg.seed;
  run.trajectories.resize(record);
  run.times = grid.nodes();

  parallel_for(
      count,
      [&](std::size_t i) {
        Rng rng = Rng::stream(cfg.seed, i);
        const Vector x0 = pc.sample(rng);
        Vector x;
        if (i < record) {
          run.trajectories[i] = euler_integrate(*field, grid, x0, &rng);
          x = run.trajectories[i].back();
        } else {
          x = euler_endpoint(*field, grid, x0, &rng);
        }
        run.samples.data.row(static_cast<Eigen::Index>(i)) = x.transpose();
      },
      threads);

  std::ostringstream summary;
  summary << "K=" << cfg.steps << " M=" << cfg.mc_samples << " eps=" << cfg.epsilon
          << " grid=" << to_string(cfg.grid);
  run.samples.meta["sampler"] = name;
  run.samples.meta["config"] = summary.str();
  return run;
}

inline SampleBatch follmer_sample(const FlowConfig& cfg, const Target& target,
                                  const Preconditioner& pc, Eigen::Index n,
                                  std::size_t threads = worker_count()) {
  return follmer_run(cfg, target, pc, n, 0, threads).samples;
}

}  // namespace follmer
