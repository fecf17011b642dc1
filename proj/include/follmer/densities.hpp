// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "follmer/core.hpp"
#include "follmer/rng.hpp"
#include "follmer/sample_batch.hpp"

namespace follmer {

/// Multivariate normal with a cached lower Cholesky factor.
///
/// Construction rejects asymmetric or non-positive-definite covariances.
/// Densities are evaluated by triangular solves against the factor.
class Gaussian {
 public:
  Gaussian(Vector mean, Matrix covariance)
      : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    const Eigen::Index d = mean_.size();
    if (d == 0) throw std::invalid_argument("Gaussian: empty mean");
    if (covariance_.rows() != d || covariance_.cols() != d)
      throw std::invalid_argument("Gaussian: covariance shape does not match mean");
    if (!mean_.allFinite() || !covariance_.allFinite())
      throw std::invalid_argument("Gaussian: non-finite parameters");
    if (((covariance_ - covariance_.transpose()).array().abs() > 1e-10).any())
      throw std::invalid_argument("Gaussian: covariance is not symmetric");
    Eigen::LLT<Matrix> llt(covariance_);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("Gaussian: covariance is not positive definite");
    chol_ = llt.matrixL();
    if ((chol_.diagonal().array() <= 0.0).any())
      throw std::invalid_argument("Gaussian: covariance is not positive definite");
    log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  }

  static Gaussian isotropic(Vector mean, double variance) {
    const Eigen::Index d = mean.size();
    return Gaussian(std::move(mean), variance * Matrix::Identity(d, d));
  }

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  const Matrix& chol() const { return chol_; }
  double log_det() const { return log_det_; }

  double log_density(const VectorRef& x) const {
    require_dim(x.size(), dim(), "Gaussian::log_density");
    const Vector w = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return -0.5 * (w.squaredNorm() + log_det_ + dim() * kLog2Pi);
  }

  /// Log-density of every column of xs.
  Vector log_density_cols(const MatrixRef& xs) const {
    require_dim(xs.rows(), dim(), "Gaussian::log_density_cols");
    Matrix w = xs.colwise() - mean_;
    chol_.triangularView<Eigen::Lower>().solveInPlace(w);
    return -0.5 * (w.colwise().squaredNorm().transpose().array() + log_det_ +
                   dim() * kLog2Pi);
  }

  /// Sigma^{-1} v via the cached factor.
  Vector solve(const VectorRef& v) const {
    Vector w = chol_.triangularView<Eigen::Lower>().solve(v);
    chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(w);
    return w;
  }

  Vector sample(Rng& rng) const {
    return mean_ + chol_.triangularView<Eigen::Lower>() * rng.normal_vector(dim());
  }

  double max_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(covariance_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  }

 private:
  Vector mean_;
  Matrix covariance_;
  Matrix chol_;
  double log_det_ = 0.0;
};

using GaussianComponent = Gaussian;

/// Reference measure gamma^{mu, Sigma} of the flow.
class Preconditioner {
 public:
  Preconditioner(Vector mean, Matrix covariance)
      : gaussian_(std::move(mean), std::move(covariance)) {}

  static Preconditioner standard(Eigen::Index d) {
    return Preconditioner(Vector::Zero(d), Matrix::Identity(d, d));
  }
  /// N(0, sigma^2 I_d).
  static Preconditioner isotropic(Eigen::Index d, double sigma) {
    return Preconditioner(Vector::Zero(d), sigma * sigma * Matrix::Identity(d, d));
  }

  Eigen::Index dim() const { return gaussian_.dim(); }
  const Vector& mean() const { return gaussian_.mean(); }
  const Matrix& covariance() const { return gaussian_.covariance(); }
  const Matrix& chol() const { return gaussian_.chol(); }
  const Gaussian& gaussian() const { return gaussian_; }

  double log_density(const VectorRef& x) const { return gaussian_.log_density(x); }
  Vector log_density_cols(const MatrixRef& xs) const {
    return gaussian_.log_density_cols(xs);
  }
  Vector sample(Rng& rng) const { return gaussian_.sample(rng); }

 private:
  Gaussian gaussian_;
};

/// Target measure nu(dx) = exp(-U(x)) dx / C with C unknown.
class Target {
 public:
  virtual ~Target() = default;

  virtual Eigen::Index dim() const = 0;

  /// U(x) up to an additive constant.
  virtual double neg_log_density(const VectorRef& x) const = 0;

  /// U evaluated on every column of xs.
  virtual Vector neg_log_density_cols(const MatrixRef& xs) const {
    Vector out(xs.cols());
    for (Eigen::Index j = 0; j < xs.cols(); ++j) out(j) = neg_log_density(xs.col(j));
    return out;
  }

  virtual bool has_gradient() const { return false; }

  /// Gradient of U; only meaningful when has_gradient() is true.
  virtual Vector grad_neg_log_density(const VectorRef& /*x*/) const {
    throw UnsupportedOperation("target does not supply a gradient");
  }

  /// E_nu[X] when known in closed form.
  virtual std::optional<Vector> mean() const { return std::nullopt; }
};

/// Finite mixture sum_i theta_i N(mu_i, Sigma_i); normalized, so U = -log p.
class GaussianMixture final : public Target {
 public:
  GaussianMixture(std::vector<double> weights, std::vector<Gaussian> components)
      : weights_(std::move(weights)), components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("GaussianMixture: no components");
    if (weights_.size() != components_.size())
      throw std::invalid_argument("GaussianMixture: weight/component count mismatch");
    dim_ = components_.front().dim();
    double sum = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (!(weights_[i] >= 0.0 && weights_[i] <= 1.0))
        throw std::invalid_argument("GaussianMixture: weight outside [0, 1]");
      if (components_[i].dim() != dim_)
        throw std::invalid_argument("GaussianMixture: components differ in dimension");
      sum += weights_[i];
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("GaussianMixture: weights do not sum to 1");
    log_weights_.resize(weights_.size());
    for (std::size_t i = 0; i < weights_.size(); ++i)
      log_weights_[i] = std::log(weights_[i]);
  }

  /// Rescales nonnegative weights to sum to one.
  static GaussianMixture normalized(std::vector<double> weights,
                                    std::vector<Gaussian> components) {
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w))
        throw std::invalid_argument("GaussianMixture: negative or non-finite weight");
      sum += w;
    }
    if (!(sum > 0.0)) throw std::invalid_argument("GaussianMixture: zero total weight");
    for (double& w : weights) w /= sum;
    return GaussianMixture(std::move(weights), std::move(components));
  }

  Eigen::Index dim() const override { return dim_; }
  std::size_t size() const { return components_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  const std::vector<Gaussian>& components() const { return components_; }
  const Gaussian& component(std::size_t i) const { return components_[i]; }

  /// log sum_i theta_i phi_i(x), by logsumexp over component terms.
  double log_density(const VectorRef& x) const {
    require_dim(x.size(), dim_, "gm_log_density");
    Vector terms(size());
    for (std::size_t i = 0; i < size(); ++i)
      terms(i) = log_weights_[i] + components_[i].log_density(x);
    return logsumexp(terms);
  }

  Vector log_density_cols(const MatrixRef& xs) const {
    require_dim(xs.rows(), dim_, "gm_log_density");
    Matrix terms(size(), xs.cols());
    for (std::size_t i = 0; i < size(); ++i)
      terms.row(i) = (components_[i].log_density_cols(xs).array() + log_weights_[i])
                         .matrix()
                         .transpose();
    Vector out(xs.cols());
    for (Eigen::Index j = 0; j < xs.cols(); ++j) out(j) = logsumexp(terms.col(j));
    return out;
  }

  double neg_log_density(const VectorRef& x) const override { return -log_density(x); }
  Vector neg_log_density_cols(const MatrixRef& xs) const override {
    return -log_density_cols(xs);
  }

  bool has_gradient() const override { return true; }

  /// sum_i w_i(x) Sigma_i^{-1} (x - mu_i) with posterior weights w_i(x).
  Vector grad_neg_log_density(const VectorRef& x) const override {
    require_dim(x.size(), dim_, "grad_neg_log_density");
    Vector terms(size());
    Matrix directions(dim_, size());
    for (std::size_t i = 0; i < size(); ++i) {
      const Gaussian& c = components_[i];
      terms(i) = log_weights_[i] + c.log_density(x);
      directions.col(i) = c.solve(x - c.mean());
    }
    return directions * softmax(terms);
  }

  std::optional<Vector> mean() const override {
    Vector m = Vector::Zero(dim_);
    for (std::size_t i = 0; i < size(); ++i) m += weights_[i] * components_[i].mean();
    return m;
  }

  Matrix covariance() const {
    const Vector m = *mean();
    Matrix second = Matrix::Zero(dim_, dim_);
    for (std::size_t i = 0; i < size(); ++i) {
      const Gaussian& c = components_[i];
      second += weights_[i] * (c.covariance() + c.mean() * c.mean().transpose());
    }
    return second - m * m.transpose();
  }

  /// Component index drawn with probability proportional to its weight.
  std::size_t sample_component(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      acc += weights_[i];
      if (u < acc) return i;
    }
    // u landed in the rounding gap above the last cumulative weight.
    for (std::size_t i = size(); i-- > 0;)
      if (weights_[i] > 0.0) return i;
    return size() - 1;
  }

 private:
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Gaussian> components_;
  Eigen::Index dim_ = 0;
};

/// User target from callables. U may carry any additive constant.
class FunctionTarget final : public Target {
 public:
  using Potential = std::function<double(const VectorRef&)>;
  using Gradient = std::function<Vector(const VectorRef&)>;

  FunctionTarget(Eigen::Index dim, Potential potential, Gradient gradient = {},
                 std::optional<Vector> mean = std::nullopt)
      : dim_(dim),
        potential_(std::move(potential)),
        gradient_(std::move(gradient)),
        mean_(std::move(mean)) {
    if (dim_ <= 0) throw std::invalid_argument("FunctionTarget: dimension must be positive");
    if (!potential_) throw std::invalid_argument("FunctionTarget: missing potential");
  }

  Eigen::Index dim() const override { return dim_; }
  double neg_log_density(const VectorRef& x) const override {
    require_dim(x.size(), dim_, "FunctionTarget");
    return potential_(x);
  }
  bool has_gradient() const override { return static_cast<bool>(gradient_); }
  Vector grad_neg_log_density(const VectorRef& x) const override {
    if (!gradient_) return Target::grad_neg_log_density(x);
    return gradient_(x);
  }
  std::optional<Vector> mean() const override { return mean_; }

 private:
  Eigen::Index dim_;
  Potential potential_;
  Gradient gradient_;
  std::optional<Vector> mean_;
};

/// n draws from the mixture; row i uses stream (seed, i).
inline SampleBatch gm_sample(const GaussianMixture& gm, Eigen::Index n,
                             std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gm_sample: n must be at least 1");
  Matrix data(n, gm.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    const Gaussian& c = gm.component(gm.sample_component(rng));
    data.row(i) = c.sample(rng).transpose();
  }
  SampleBatch batch(std::move(data), seed);
  batch.meta["sampler"] = "ground_truth";
  return batch;
}

inline double gm_log_density(const GaussianMixture& gm, const VectorRef& x) {
  return gm.log_density(x);
}

/// log(d nu / d gamma^{mu,Sigma})(x) up to the target's unknown log C.
inline double log_rnd(const Target& target, const Preconditioner& pc,
                      const VectorRef& x) {
  require_dim(target.dim(), pc.dim(), "log_rnd");
  return -target.neg_log_density(x) - pc.log_density(x);
}

/// Column-wise log_rnd.
inline Vector log_rnd_cols(const Target& target, const Preconditioner& pc,
                           const MatrixRef& xs) {
  require_dim(target.dim(), pc.dim(), "log_rnd");
  return -(target.neg_log_density_cols(xs) + pc.log_density_cols(xs));
}

}  // namespace follmer
