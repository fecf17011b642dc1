// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "follmer/core.hpp"

namespace follmer {

/// n x d sample matrix (one row per draw) plus generation metadata.
struct SampleBatch {
  Matrix data;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> meta;

  SampleBatch() = default;
  SampleBatch(Matrix d, std::uint64_t s) : data(std::move(d)), seed(s) {}

  Eigen::Index size() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }
  Vector row(Eigen::Index i) const { return data.row(i).transpose(); }
  bool finite() const { return data.allFinite(); }
};

}  // namespace follmer
