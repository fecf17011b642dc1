// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The eleven Gaussian-mixture benchmark targets with their preconditioners.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "follmer/densities.hpp"

namespace follmer {

struct ExampleSpec {
  int id = 0;
  Eigen::Index dim = 0;
  GaussianMixture mixture;
  Preconditioner preconditioner;
  std::string notes;
};

inline constexpr int kExampleCount = 11;

namespace detail {

inline Gaussian iso_component(std::initializer_list<double> mean, double variance) {
  Vector m(static_cast<Eigen::Index>(mean.size()));
  Eigen::Index i = 0;
  for (double v : mean) m(i++) = v;
  return Gaussian::isotropic(std::move(m), variance);
}

inline GaussianMixture uniform_mixture(std::vector<Gaussian> comps) {
  std::vector<double> w(comps.size(), 1.0 / static_cast<double>(comps.size()));
  return GaussianMixture(std::move(w), std::move(comps));
}

inline GaussianMixture two_mode_1d(double separation) {
  return GaussianMixture({0.25, 0.75}, {iso_component({-separation}, 0.25),
                                        iso_component({separation}, 0.25)});
}

inline GaussianMixture circle(int modes, double radius) {
  std::vector<Gaussian> comps;
  for (int i = 1; i <= modes; ++i) {
    const double a = 2.0 * (i - 1) * std::numbers::pi / modes;
    comps.push_back(iso_component({radius * std::sin(a), radius * std::cos(a)}, 0.03));
  }
  return uniform_mixture(std::move(comps));
}

// Means scale * (i + offset, j + offset) for i, j in 1..side.
inline GaussianMixture grid(int side, double scale, double offset, double step = 1.0) {
  std::vector<Gaussian> comps;
  for (int i = 1; i <= side; ++i)
    for (int j = 1; j <= side; ++j)
      comps.push_back(iso_component({scale * (step * i + offset), scale * (step * j + offset)}, 0.03));
  return uniform_mixture(std::move(comps));
}

}  // namespace detail

/// Benchmark target `id` (1..11). Example 11 takes its dimension from
/// `dim11`; all other examples have a fixed dimension.
inline ExampleSpec example_registry(int id, Eigen::Index dim11 = 2) {
  using detail::iso_component;
  switch (id) {
    case 1:
    case 2:
    case 3: {
      const double sep = id == 1 ? 2.0 : id == 2 ? 4.0 : 8.0;
      return {id, 1, detail::two_mode_1d(sep), Preconditioner::standard(1),
              "1/4 N(-a, 0.25) + 3/4 N(a, 0.25)"};
    }
    case 4:
      return {id, 2, detail::circle(8, 4.0), Preconditioner::isotropic(2, 2.0),
              "8 modes on a circle of radius 4; equal weights normalized to 1/8"};
    case 5:
      return {id, 2, detail::circle(16, 8.0), Preconditioner::isotropic(2, 4.0),
              "16 modes on a circle of radius 8; equal weights normalized to 1/16"};
    case 6:
      return {id, 2, detail::grid(4, 1.0, -5.0, 2.0), Preconditioner::standard(2),
              "4x4 grid with means (2i-5, 2j-5); equal weights normalized to 1/16"};
    case 7:
      return {id, 2, detail::grid(4, 2.0, -5.0, 2.0), Preconditioner::isotropic(2, 2.0),
              "4x4 grid with means 2(2i-5, 2j-5); equal weights normalized to 1/16"};
    case 8:
      return {id, 2, detail::grid(5, 3.0, -3.0), Preconditioner::isotropic(2, 1.7),
              "5x5 grid with means 3(i-3, j-3); equal weights normalized to 1/25"};
    case 9:
      return {id, 2, detail::grid(7, 3.0, -4.0), Preconditioner::isotropic(2, 2.1),
              "7x7 grid with means 3(i-4, j-4); equal weights normalized to 1/49"};
    case 10: {
      std::vector<Gaussian> comps;
      for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j) {
          const double rho = ((i + j + 1) % 2 == 0 ? 1.0 : -1.0) * 0.9;
          Matrix cov(2, 2);
          cov << 1.0, rho, rho, 1.0;
          Vector m(2);
          m << 6.0 * i - 6.0, 6.0 * j - 6.0;
          comps.emplace_back(std::move(m), std::move(cov));
        }
      return {id, 2, detail::uniform_mixture(std::move(comps)), Preconditioner::standard(2),
              "2x2 grid at (6i-6, 6j-6), unit variances, correlation (-1)^(i+j+1) 0.9; "
              "equal weights normalized to 1/4"};
    }
    case 11: {
      if (dim11 < 1) throw std::invalid_argument("example 11: dimension must be positive");
      const Vector ones = Vector::Ones(dim11);
      GaussianMixture gm({0.2, 0.8}, {Gaussian::isotropic(-ones, 0.25),
                                      Gaussian::isotropic(ones, 0.25)});
      return {id, dim11, std::move(gm), Preconditioner::standard(dim11),
              "1/5 N(-1, 0.25 I) + 4/5 N(1, 0.25 I) in d = " + std::to_string(dim11)};
    }
    default:
      throw std::invalid_argument("unknown example id " + std::to_string(id) +
                                  " (expected 1.." + std::to_string(kExampleCount) + ")");
  }
}

}  // namespace follmer
