// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "follmer/core.hpp"

namespace follmer {

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Shortest augmenting paths with row/column potentials (Jonker-Volgenant
/// family), O(n^3). Returns col_of_row with cost(i, col_of_row[i]) summed
/// minimal over all permutations.
inline std::vector<Eigen::Index> solve_assignment(const MatrixRef& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("solve_assignment: cost must be square");
  if (!cost.allFinite()) throw std::invalid_argument("solve_assignment: non-finite cost");
  constexpr double inf = std::numeric_limits<double>::infinity();

  // 1-based bookkeeping; index 0 is the virtual source column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), min_slack(n + 1);
  std::vector<Eigen::Index> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (Eigen::Index i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    Eigen::Index j0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = row_of_col[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Eigen::Index> col_of_row(n);
  for (Eigen::Index j = 1; j <= n; ++j) col_of_row[row_of_col[j] - 1] = j - 1;
  return col_of_row;
}

}  // namespace follmer
