// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Reproducible, splittable random streams.
//
// Every particle or chain owns a stream derived from (seed, index) alone, so
// results never depend on how work is scheduled across threads. The engine
// is xoshiro256** seeded through splitmix64; normal variates use the Boost
// ziggurat sampler.

#include <boost/random/normal_distribution.hpp>

#include <array>
#include <cstdint>
#include <limits>

#include "follmer/core.hpp"

namespace follmer {

class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Deterministic child seed; distinct indices give decorrelated seeds.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::uint64_t index) noexcept {
  SplitMix64 mix(seed);
  const std::uint64_t a = mix.next();
  SplitMix64 mix2(a ^ (index * 0xD1B54A32D192ED03ULL + 0x8BB84B93962EACC9ULL));
  return mix2.next();
}

/// xoshiro256**; satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept {
    SplitMix64 mix(seed);
    for (auto& s : state_) s = mix.next();
  }

  /// Stream `index` of the family rooted at `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index) noexcept {
    return Rng(derive_seed(seed, index));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  double normal() { return normal_(*this); }

  /// Fills a vector or matrix with independent N(0, 1) draws, column-major.
  template <typename Derived>
  void fill_normal(Eigen::DenseBase<Derived>& out) {
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal_(*this);
  }

  Vector normal_vector(Eigen::Index d) {
    Vector z(d);
    fill_normal(z);
    return z;
  }

  bool operator==(const Rng& other) const noexcept {
    return state_ == other.state_;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  boost::random::normal_distribution<double> normal_{};
};

}  // namespace follmer
