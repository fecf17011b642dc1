// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Two-sample discrepancies between sampler output and ground-truth draws.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "follmer/assignment.hpp"
#include "follmer/core.hpp"
#include "follmer/densities.hpp"
#include "follmer/rng.hpp"
#include "follmer/sample_batch.hpp"

namespace follmer {

/// Exact W2 between two equal-size empirical measures on the line.
inline double wasserstein2_1d(const VectorRef& xs, const VectorRef& ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("wasserstein2_1d: samples differ in size");
  if (xs.size() == 0) throw std::invalid_argument("wasserstein2_1d: empty samples");
  std::vector<double> a(xs.data(), xs.data() + xs.size());
  std::vector<double> b(ys.data(), ys.data() + ys.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc / static_cast<double>(a.size()));
}

/// `cap` rows chosen without replacement (seeded), or all rows if n <= cap.
inline Matrix subsample_rows(const MatrixRef& xs, Eigen::Index cap, std::uint64_t seed) {
  const Eigen::Index n = xs.rows();
  if (cap <= 0 || n <= cap) return xs;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  for (Eigen::Index i = 0; i < cap; ++i) {
    const auto span = static_cast<std::uint64_t>(n - i);
    const auto j = i + static_cast<Eigen::Index>(rng() % span);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  Matrix out(cap, xs.cols());
  for (Eigen::Index i = 0; i < cap; ++i) out.row(i) = xs.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

inline constexpr Eigen::Index kDefaultW2Cap = 1000;
inline constexpr Eigen::Index kDefaultMmdCap = 2000;

/// Empirical W2 by exact assignment under squared Euclidean cost.
/// Inputs larger than `cap` rows are subsampled first.
inline double wasserstein2_nd(const MatrixRef& xs, const MatrixRef& ys,
                              Eigen::Index cap = kDefaultW2Cap, std::uint64_t seed = 0) {
  if (xs.rows() != ys.rows())
    throw std::invalid_argument("wasserstein2_nd: samples differ in size");
  if (xs.cols() != ys.cols()) throw std::invalid_argument("wasserstein2_nd: dimension mismatch");
  if (xs.rows() == 0) throw std::invalid_argument("wasserstein2_nd: empty samples");
  const Matrix a = subsample_rows(xs, cap, derive_seed(seed, 0));
  const Matrix b = subsample_rows(ys, cap, derive_seed(seed, 1));
  const Eigen::Index n = a.rows();
  Matrix cost(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  const auto match = solve_assignment(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += cost(i, match[static_cast<std::size_t>(i)]);
  return std::sqrt(total / static_cast<double>(n));
}

/// Median pairwise Euclidean distance over the rows of xs and ys together.
inline double median_heuristic_bandwidth(const MatrixRef& xs, const MatrixRef& ys) {
  const Eigen::Index n = xs.rows(), m = ys.rows(), total = n + m;
  auto point = [&](Eigen::Index i) { return i < n ? xs.row(i) : ys.row(i - n); };
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(total * (total - 1) / 2));
  for (Eigen::Index i = 0; i < total; ++i)
    for (Eigen::Index j = i + 1; j < total; ++j) d2.push_back((point(i) - point(j)).squaredNorm());
  const std::size_t mid = d2.size() / 2;
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid), d2.end());
  const double upper = std::sqrt(d2[mid]);
  if (d2.size() % 2 == 1) return upper;
  const double lower =
      std::sqrt(*std::max_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid)));
  return 0.5 * (lower + upper);
}

/// Biased (V-statistic) squared MMD with a Gaussian kernel whose bandwidth is
/// the pooled median pairwise distance. Clamped at zero.
inline double mmd(const MatrixRef& xs, const MatrixRef& ys) {
  if (xs.rows() < 2 || ys.rows() < 2)
    throw std::invalid_argument("mmd: each sample needs at least two points");
  if (xs.cols() != ys.cols()) throw std::invalid_argument("mmd: dimension mismatch");
  const double sigma = median_heuristic_bandwidth(xs, ys);
  if (!(sigma > 0.0)) throw DegenerateInput("mmd: all pooled points coincide");
  const double scale = -1.0 / (2.0 * sigma * sigma);

  // Sum over ordered pairs within one sample, diagonal included.
  auto within = [&](const MatrixRef& s) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index j = i + 1; j < s.rows(); ++j)
        off += std::exp(scale * (s.row(i) - s.row(j)).squaredNorm());
    return static_cast<double>(s.rows()) + 2.0 * off;
  };
  double cross = 0.0;
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    for (Eigen::Index j = 0; j < ys.rows(); ++j)
      cross += std::exp(scale * (xs.row(i) - ys.row(j)).squaredNorm());

  const double n = static_cast<double>(xs.rows()), m = static_cast<double>(ys.rows());
  const double value = within(xs) / (n * n) + within(ys) / (m * m) - 2.0 * cross / (n * m);
  return std::max(0.0, value);
}

struct MetricOptions {
  Eigen::Index w2_cap = kDefaultW2Cap;
  Eigen::Index mmd_cap = kDefaultMmdCap;
  std::uint64_t subsample_seed = 0;
};

/// Raw metrics against truth_a, minus the truth_b-vs-truth_a baseline.
struct MetricReport {
  double raw_w2 = 0.0;
  double raw_mmd = 0.0;
  double baseline_w2 = 0.0;
  double baseline_mmd = 0.0;
  double adj_w2 = 0.0;
  double adj_mmd = 0.0;
  Eigen::Index n_used = 0;
  std::uint64_t subsample_seed = 0;
};

inline MetricReport adjusted_metrics(const SampleBatch& samples, const SampleBatch& truth_a,
                                     const SampleBatch& truth_b, const MetricOptions& opt = {}) {
  if (samples.size() != truth_a.size() || samples.size() != truth_b.size())
    throw std::invalid_argument("adjusted_metrics: batches differ in size");
  if (samples.dim() != truth_a.dim() || samples.dim() != truth_b.dim())
    throw std::invalid_argument("adjusted_metrics: batches differ in dimension");

  // samples and truth_b share subsample indices, so the two comparisons
  // against truth_a see identically drawn rows.
  const std::uint64_t seed = opt.subsample_seed;
  MetricReport r;
  r.subsample_seed = seed;
  if (samples.dim() == 1) {
    r.raw_w2 = wasserstein2_1d(samples.data.col(0), truth_a.data.col(0));
    r.baseline_w2 = wasserstein2_1d(truth_b.data.col(0), truth_a.data.col(0));
    r.n_used = samples.size();
  } else {
    const Matrix s = subsample_rows(samples.data, opt.w2_cap, derive_seed(seed, 10));
    const Matrix a = subsample_rows(truth_a.data, opt.w2_cap, derive_seed(seed, 11));
    const Matrix b = subsample_rows(truth_b.data, opt.w2_cap, derive_seed(seed, 10));
    r.raw_w2 = wasserstein2_nd(s, a, 0);
    r.baseline_w2 = wasserstein2_nd(b, a, 0);
    r.n_used = s.rows();
  }
  {
    const Matrix s = subsample_rows(samples.data, opt.mmd_cap, derive_seed(seed, 20));
    const Matrix a = subsample_rows(truth_a.data, opt.mmd_cap, derive_seed(seed, 21));
    const Matrix b = subsample_rows(truth_b.data, opt.mmd_cap, derive_seed(seed, 20));
    r.raw_mmd = mmd(s, a);
    r.baseline_mmd = mmd(b, a);
  }
  r.adj_w2 = r.raw_w2 - r.baseline_w2;
  r.adj_mmd = r.raw_mmd - r.baseline_mmd;
  return r;
}

/// Sample means (and standard errors) of the test functions
/// a^T x, (a^T x)^2, exp(a^T x) and 5 cos(a^T x).
struct MomentEstimates {
  static constexpr std::array<const char*, 4> names{"first", "second", "mgf", "cos"};
  std::array<double, 4> value{};
  std::array<double, 4> std_error{};
};

inline MomentEstimates moment_estimates(const SampleBatch& samples, const VectorRef& alpha) {
  require_dim(alpha.size(), samples.dim(), "moment_estimates");
  if (std::abs(alpha.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("moment_estimates: alpha must be a unit vector");
  if (samples.size() < 1) throw std::invalid_argument("moment_estimates: empty samples");
  const Vector proj = samples.data * alpha;
  const auto n = static_cast<double>(proj.size());
  std::array<Vector, 4> h;
  h[0] = proj;
  h[1] = proj.array().square();
  h[2] = proj.array().exp();
  h[3] = 5.0 * proj.array().cos();
  MomentEstimates out;
  for (std::size_t k = 0; k < 4; ++k) {
    const double mean = h[k].mean();
    out.value[k] = mean;
    if (proj.size() > 1) {
      const double var = (h[k].array() - mean).square().sum() / (n - 1.0);
      out.std_error[k] = std::sqrt(var / n);
    }
  }
  return out;
}

/// Exact expectations of the same test functions under a Gaussian mixture.
inline std::array<double, 4> exact_moments(const GaussianMixture& gm, const VectorRef& alpha) {
  require_dim(alpha.size(), gm.dim(), "exact_moments");
  std::array<double, 4> out{};
  for (std::size_t i = 0; i < gm.size(); ++i) {
    const double w = gm.weights()[i];
    const double m = alpha.dot(gm.component(i).mean());
    const double v = alpha.dot(gm.component(i).covariance() * alpha);
    out[0] += w * m;
    out[1] += w * (v + m * m);
    out[2] += w * std::exp(m + 0.5 * v);
    out[3] += w * 5.0 * std::cos(m) * std::exp(-0.5 * v);
  }
  return out;
}

struct ModeCoverage {
  std::vector<std::size_t> counts;
  std::size_t covered = 0;
  std::size_t n = 0;

  double share(std::size_t mode) const {
    return n == 0 ? 0.0 : static_cast<double>(counts[mode]) / static_cast<double>(n);
  }
};

/// Nearest-mean assignment; a sample counts toward its mode only within
/// radius_mult * sqrt(largest eigenvalue) of that component. A mode is
/// covered once it holds at least `min_share` of all samples.
inline ModeCoverage mode_coverage(const SampleBatch& samples, const GaussianMixture& gm,
                                  double radius_mult = 3.0, double min_share = 0.01) {
  require_dim(samples.dim(), gm.dim(), "mode_coverage");
  if (!(radius_mult > 0.0)) throw std::invalid_argument("mode_coverage: radius_mult must be positive");
  std::vector<double> radius2(gm.size());
  for (std::size_t i = 0; i < gm.size(); ++i) {
    const double r = radius_mult * std::sqrt(gm.component(i).max_eigenvalue());
    radius2[i] = r * r;
  }
  ModeCoverage cov;
  cov.counts.assign(gm.size(), 0);
  cov.n = static_cast<std::size_t>(samples.size());
  for (Eigen::Index s = 0; s < samples.size(); ++s) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < gm.size(); ++i) {
      const double d2 = (samples.data.row(s).transpose() - gm.component(i).mean()).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    if (best_d2 <= radius2[best]) ++cov.counts[best];
  }
  const double need = min_share * static_cast<double>(cov.n);
  for (std::size_t c : cov.counts)
    if (c > 0 && static_cast<double>(c) >= need) ++cov.covered;
  return cov;
}

}  // namespace follmer
