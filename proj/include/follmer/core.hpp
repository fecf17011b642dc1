// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace follmer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;
using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Raised when an operation is not available for the given inputs, e.g. a
/// closed-form velocity requested for a target that is not a mixture.
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when input data is degenerate for a statistic (zero bandwidth).
class DegenerateInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite intermediate value during integration or a Langevin update.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::size_t step, double time,
                   Vector state)
      : std::runtime_error(describe(what, step, time, state)),
        step_(step),
        time_(time),
        state_(std::move(state)) {}

  std::size_t step() const noexcept { return step_; }
  double time() const noexcept { return time_; }
  const Vector& state() const noexcept { return state_; }

 private:
  static std::string describe(const std::string& what, std::size_t step,
                              double time, const Vector& state) {
    std::ostringstream os;
    os << what << " (step " << step << ", t = " << time << ", x = ["
       << state.transpose() << "])";
    return os.str();
  }

  std::size_t step_;
  double time_;
  Vector state_;
};

inline void require_dim(Eigen::Index got, Eigen::Index want,
                        const char* what) {
  if (got != want) {
    std::ostringstream os;
    os << what << ": dimension mismatch (got " << got << ", expected " << want
       << ")";
    throw std::invalid_argument(os.str());
  }
}

/// log(sum(exp(v))) shifted by the maximum; -inf for an empty or all -inf
/// input.
inline double logsumexp(const VectorRef& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

/// Normalized weights exp(v - logsumexp(v)).
inline Vector softmax(const VectorRef& v) {
  const double m = v.maxCoeff();
  Vector w = (v.array() - m).exp();
  w /= w.sum();
  return w;
}

inline bool all_finite(const VectorRef& v) { return v.allFinite(); }

}  // namespace follmer
