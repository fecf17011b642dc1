// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "follmer/follmer.hpp"

namespace follmer {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Matrix random_points(Eigen::Index n, Eigen::Index d, Rng& rng) {
  Matrix m(n, d);
  rng.fill_normal(m);
  return m;
}

double brute_force_w2(const Matrix& xs, const Matrix& ys) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(xs.rows()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  double best = INFINITY;
  do {
    double cost = 0.0;
    for (Eigen::Index i = 0; i < xs.rows(); ++i)
      cost += (xs.row(i) - ys.row(perm[static_cast<std::size_t>(i)])).squaredNorm();
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(xs.rows()));
}

// Expanded V-statistic with every kernel term written out separately.
double expanded_mmd(const Matrix& xs, const Matrix& ys, double sigma) {
  auto k = [&](const auto& a, const auto& b) {
    return std::exp(-(a - b).squaredNorm() / (2.0 * sigma * sigma));
  };
  const double n = static_cast<double>(xs.rows()), m = static_cast<double>(ys.rows());
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    for (Eigen::Index j = 0; j < xs.rows(); ++j) xx += k(xs.row(i), xs.row(j));
  for (Eigen::Index i = 0; i < ys.rows(); ++i)
    for (Eigen::Index j = 0; j < ys.rows(); ++j) yy += k(ys.row(i), ys.row(j));
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    for (Eigen::Index j = 0; j < ys.rows(); ++j) xy += k(xs.row(i), ys.row(j));
  return xx / (n * n) + yy / (m * m) - 2.0 * xy / (n * m);
}

double pooled_median_distance(const Matrix& xs, const Matrix& ys) {
  Matrix pooled(xs.rows() + ys.rows(), xs.cols());
  pooled << xs, ys;
  std::vector<double> d;
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j)
      d.push_back((pooled.row(i) - pooled.row(j)).norm());
  std::sort(d.begin(), d.end());
  const std::size_t h = d.size() / 2;
  return d.size() % 2 == 1 ? d[h] : 0.5 * (d[h - 1] + d[h]);
}

TEST(Wasserstein1d, Examples) {
  EXPECT_EQ(wasserstein2_1d(vec({1.0, 5.0, -2.0}), vec({1.0, 5.0, -2.0})), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein2_1d(vec({0.0}), vec({1.0})), 1.0);
  const double sorted_pairing = std::sqrt((1.0 + 1.0) / 2.0);
  const double crossed_pairing = std::sqrt((9.0 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(wasserstein2_1d(vec({0.0, 2.0}), vec({1.0, 3.0})),
                   std::min(sorted_pairing, crossed_pairing));
  EXPECT_DOUBLE_EQ(wasserstein2_1d(vec({2.0, 0.0}), vec({1.0, 3.0})), 1.0);
}

TEST(Wasserstein1d, LengthMismatch) {
  EXPECT_THROW(wasserstein2_1d(vec({0.0, 1.0}), vec({1.0})), std::invalid_argument);
}

TEST(WassersteinNd, IdenticalIsZero) {
  Rng rng(1);
  const Matrix x = random_points(30, 3, rng);
  EXPECT_EQ(wasserstein2_nd(x, x), 0.0);
}

TEST(WassersteinNd, MatchesBruteForcePermutations) {
  Rng rng(2);
  for (int inst = 0; inst < 50; ++inst) {
    const Eigen::Index n = 1 + inst % 6, d = 1 + inst % 3;
    const Matrix x = random_points(n, d, rng), y = random_points(n, d, rng) * 2.0;
    EXPECT_NEAR(wasserstein2_nd(x, y), brute_force_w2(x, y), 1e-12) << "instance " << inst;
  }
}

TEST(WassersteinNd, OneDimensionAgreesWithSorting) {
  Rng rng(3);
  for (int inst = 0; inst < 10; ++inst) {
    const Matrix x = random_points(200, 1, rng), y = random_points(200, 1, rng) + Matrix::Constant(200, 1, 0.5);
    EXPECT_NEAR(wasserstein2_nd(x, y), wasserstein2_1d(x.col(0), y.col(0)), 1e-10);
  }
}

TEST(WassersteinNd, SymmetricAndTriangle) {
  Rng rng(4);
  for (int inst = 0; inst < 50; ++inst) {
    const Matrix x = random_points(25, 2, rng), y = random_points(25, 2, rng) * 1.5,
                 z = random_points(25, 2, rng) + Matrix::Constant(25, 2, 1.0);
    EXPECT_NEAR(wasserstein2_nd(x, y), wasserstein2_nd(y, x), 1e-12);
    EXPECT_LE(wasserstein2_nd(x, z), wasserstein2_nd(x, y) + wasserstein2_nd(y, z) + 1e-12);
    EXPECT_GE(wasserstein2_nd(x, y), 0.0);
  }
  const Matrix a = random_points(40, 1, rng), b = random_points(40, 1, rng);
  EXPECT_NEAR(wasserstein2_1d(a.col(0), b.col(0)), wasserstein2_1d(b.col(0), a.col(0)), 1e-12);
}

TEST(WassersteinNd, SubsamplesAboveCapDeterministically) {
  Rng rng(5);
  const Matrix x = random_points(300, 2, rng), y = random_points(300, 2, rng);
  const double a = wasserstein2_nd(x, y, 50, 7), b = wasserstein2_nd(x, y, 50, 7);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, wasserstein2_nd(x, y, 50, 8));
  const Matrix sub = subsample_rows(x, 50, 3);
  EXPECT_EQ(sub.rows(), 50);
  EXPECT_EQ(subsample_rows(x, 0, 3).rows(), 300);
}

TEST(WassersteinNd, DimensionMismatch) {
  EXPECT_THROW(wasserstein2_nd(Matrix::Zero(3, 2), Matrix::Zero(3, 1)), std::invalid_argument);
  EXPECT_THROW(wasserstein2_nd(Matrix::Zero(3, 2), Matrix::Zero(4, 2)), std::invalid_argument);
}

TEST(Assignment, SolvesSmallCostMatrix) {
  Matrix c(3, 3);
  c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const auto match = solve_assignment(c);
  double total = 0.0;
  for (Eigen::Index i = 0; i < 3; ++i) total += c(i, match[static_cast<std::size_t>(i)]);
  EXPECT_EQ(total, 5.0);
}

TEST(Mmd, IdenticalSetsVanish) {
  Rng rng(6);
  const Matrix x = random_points(20, 2, rng);
  EXPECT_EQ(mmd(x, x), 0.0);
}

TEST(Mmd, MatchesExpandedKernelSum) {
  Rng rng(7);
  for (int inst = 0; inst < 20; ++inst) {
    const Eigen::Index n = 3 + inst % 3, m = 2 + inst % 4, d = 1 + inst % 2;
    const Matrix x = random_points(n, d, rng), y = random_points(m, d, rng) + Matrix::Constant(m, d, 0.7);
    const double sigma = pooled_median_distance(x, y);
    EXPECT_NEAR(median_heuristic_bandwidth(x, y), sigma, 1e-14);
    EXPECT_NEAR(mmd(x, y), std::max(0.0, expanded_mmd(x, y, sigma)), 1e-10) << "instance " << inst;
  }
}

TEST(Mmd, ThreeVersusTwoPoints) {
  Matrix x(3, 1), y(2, 1);
  x << 0.0, 1.0, 3.0;
  y << 0.5, 2.0;
  // Pooled distances sorted: 0.5 0.5 1 1 1 1.5 2 2 2.5 3, median 1.25.
  const double s2 = 2.0 * 1.25 * 1.25;
  auto k = [&](double d) { return std::exp(-d * d / s2); };
  const double xx = (3.0 + 2.0 * (k(1) + k(3) + k(2))) / 9.0;
  const double yy = (2.0 + 2.0 * k(1.5)) / 4.0;
  const double xy = (k(0.5) + k(2) + k(0.5) + k(1) + k(2.5) + k(1)) / 6.0;
  EXPECT_NEAR(mmd(x, y), xx + yy - 2.0 * xy, 1e-12);
}

TEST(Mmd, TranslationInvariantAndSymmetric) {
  Rng rng(8);
  const Matrix x = random_points(30, 3, rng), y = random_points(25, 3, rng) * 1.3;
  Eigen::RowVectorXd shift(3);
  shift << 10.0, -4.0, 2.5;
  const Matrix xs = x.rowwise() + shift, ys = y.rowwise() + shift;
  EXPECT_NEAR(mmd(xs, ys), mmd(x, y), 1e-12);
  EXPECT_NEAR(mmd(x, y), mmd(y, x), 1e-12);
  EXPECT_GE(mmd(x, y), 0.0);
}

TEST(Mmd, DegeneratePooledSample) {
  EXPECT_THROW(mmd(Matrix::Ones(3, 2), Matrix::Ones(4, 2)), DegenerateInput);
}

TEST(AdjustedMetrics, SameBatchGivesExactZero) {
  for (int id : {1, 4}) {
    const auto gm = example_registry(id).mixture;
    const auto a = gm_sample(gm, 2000, 1), b = gm_sample(gm, 2000, 2);
    const auto r = adjusted_metrics(b, a, b);
    EXPECT_EQ(r.adj_w2, 0.0);
    EXPECT_EQ(r.adj_mmd, 0.0);
  }
}

TEST(AdjustedMetrics, ReportIdentity) {
  const auto spec = example_registry(6);
  FlowConfig cfg;
  cfg.steps = 20;
  const auto s = follmer_sample(cfg, spec.mixture, spec.preconditioner, 1500);
  const auto r = adjusted_metrics(s, gm_sample(spec.mixture, 1500, 3),
                                  gm_sample(spec.mixture, 1500, 4));
  EXPECT_EQ(r.adj_w2, r.raw_w2 - r.baseline_w2);
  EXPECT_EQ(r.adj_mmd, r.raw_mmd - r.baseline_mmd);
  EXPECT_GE(r.raw_w2, 0.0);
  EXPECT_GE(r.baseline_mmd, 0.0);
  EXPECT_EQ(r.n_used, 1000);
}

TEST(AdjustedMetrics, SizeMismatch) {
  const auto gm = example_registry(1).mixture;
  EXPECT_THROW(adjusted_metrics(gm_sample(gm, 10, 1), gm_sample(gm, 11, 2), gm_sample(gm, 10, 3)),
               std::invalid_argument);
}

TEST(AdjustedMetrics, NullDistributionCentered) {
  const auto gm = example_registry(1).mixture;
  std::vector<double> adj;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = adjusted_metrics(gm_sample(gm, 10000, 1000 + s), gm_sample(gm, 10000, 2000 + s),
                                    gm_sample(gm, 10000, 3000 + s));
    adj.push_back(r.adj_w2);
  }
  const double mean = std::accumulate(adj.begin(), adj.end(), 0.0) / 20.0;
  double var = 0.0;
  for (double a : adj) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / 19.0);
  EXPECT_LT(std::abs(mean), 2.0 * sd);
}

TEST(AdjustedMetrics, CollapsedMetropolisOnSeparatedModes) {
  const auto gm = example_registry(3).mixture;
  McmcConfig cfg;
  cfg.seed = 1;
  const auto s = run_chains(cfg, gm, 10000);
  const auto r = adjusted_metrics(s, gm_sample(gm, 10000, 5), gm_sample(gm, 10000, 6));
  EXPECT_GT(r.adj_w2, 1.0);
}

TEST(Moments, PointMassAtOrigin) {
  const SampleBatch origin(Matrix::Zero(50, 3), 0);
  const auto m = moment_estimates(origin, Vector::Ones(3) / std::sqrt(3.0));
  EXPECT_EQ(m.value[0], 0.0);
  EXPECT_EQ(m.value[1], 0.0);
  EXPECT_EQ(m.value[2], 1.0);
  EXPECT_EQ(m.value[3], 5.0);
}

TEST(Moments, RejectsNonUnitDirection) {
  const SampleBatch origin(Matrix::Zero(5, 2), 0);
  EXPECT_THROW(moment_estimates(origin, Vector::Ones(2)), std::invalid_argument);
}

TEST(Moments, GaussianClosedForms) {
  Vector m(2);
  m << 0.4, -0.3;
  Matrix cov(2, 2);
  cov << 0.5, 0.1, 0.1, 0.3;
  const GaussianMixture gm({1.0}, {Gaussian(m, cov)});
  Vector alpha(2);
  alpha << 0.6, 0.8;
  const double am = alpha.dot(m), v = alpha.dot(cov * alpha);
  const std::array<double, 4> want{am, v + am * am, std::exp(am + 0.5 * v),
                                   5.0 * std::cos(am) * std::exp(-0.5 * v)};
  const auto exact = exact_moments(gm, alpha);
  const auto est = moment_estimates(gm_sample(gm, 100000, 9), alpha);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(exact[k], want[k], 1e-14) << MomentEstimates::names[k];
    EXPECT_LT(std::abs(est.value[k] - want[k]), 4.0 * est.std_error[k]) << MomentEstimates::names[k];
  }
}

TEST(Moments, ExampleElevenFirstMoment) {
  for (Eigen::Index d : {1, 4, 10}) {
    const auto gm = example_registry(11, d).mixture;
    const Vector alpha = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
    EXPECT_NEAR(exact_moments(gm, alpha)[0], 0.6 * std::sqrt(static_cast<double>(d)), 1e-14);
  }
}

TEST(ModeCoverage, MeansCoverEveryMode) {
  const auto gm = example_registry(8).mixture;
  Matrix means(static_cast<Eigen::Index>(gm.size()), 2);
  for (std::size_t i = 0; i < gm.size(); ++i)
    means.row(static_cast<Eigen::Index>(i)) = gm.component(i).mean().transpose();
  const auto cov = mode_coverage(SampleBatch(means, 0), gm);
  EXPECT_EQ(cov.covered, gm.size());
}

TEST(ModeCoverage, SinglePointCoversOneMode) {
  const auto gm = example_registry(4).mixture;
  const Matrix at(Matrix::Constant(100, 2, 0.0).rowwise() + gm.component(2).mean().transpose());
  const auto cov = mode_coverage(SampleBatch(at, 0), gm);
  EXPECT_EQ(cov.covered, 1u);
  EXPECT_EQ(cov.counts[2], 100u);
}

TEST(ModeCoverage, GroundTruthCoversCircle) {
  const auto gm = example_registry(4).mixture;
  EXPECT_EQ(mode_coverage(gm_sample(gm, 10000, 10), gm).covered, 8u);
}

TEST(ModeCoverage, FarPointsNotCounted) {
  const auto gm = example_registry(4).mixture;
  const auto cov = mode_coverage(SampleBatch(Matrix::Constant(10, 2, 50.0), 0), gm);
  EXPECT_EQ(cov.covered, 0u);
  EXPECT_THROW(mode_coverage(SampleBatch(Matrix::Zero(2, 2), 0), gm, 0.0), std::invalid_argument);
}

}  // namespace
}  // namespace follmer
