// Copyright 2026 The foascene Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FOASCENE_ASSIGNMENT_HPP_
#define FOASCENE_ASSIGNMENT_HPP_

#include <functional>
#include <limits>
#include <vector>

#include "foascene/common.hpp"

namespace foascene::assign {

/// Exact minimum-cost assignment on a square matrix via shortest augmenting
/// paths with dual potentials, O(n^3). Returns the column matched to each
/// row. Deterministic for a given matrix.
inline std::vector<int> solve_min_square(
    const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      int i0 = p[static_cast<std::size_t>(j0)], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        double cur = cost[static_cast<std::size_t>(i0 - 1)]
                         [static_cast<std::size_t>(j - 1)] -
                     u[static_cast<std::size_t>(i0)] -
                     v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[static_cast<std::size_t>(j)] > 0)
      row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] =
          j - 1;
  }
  return row_to_col;
}

/// Maximization wrapper over the square solver.
inline std::vector<int> solve_max_square(
    const std::vector<std::vector<double>>& score) {
  std::vector<std::vector<double>> cost(score.size());
  for (std::size_t i = 0; i < score.size(); ++i) {
    cost[i].resize(score[i].size());
    for (std::size_t j = 0; j < score[i].size(); ++j) cost[i][j] = -score[i][j];
  }
  return solve_min_square(cost);
}

// A complete one-to-one matching of min(m, n) pairs. row_to_col has one
// entry per row; -1 marks rows left over when m > n.
struct Injection {
  std::vector<int> row_to_col;
  double total = 0.0;
};

namespace detail {

// Lexicographic order on row_to_col with -1 sorting last.
inline bool seq_less(const std::vector<int>& a, const std::vector<int>& b) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    unsigned ua = a[i] < 0 ? ~0u : static_cast<unsigned>(a[i]);
    unsigned ub = b[i] < 0 ? ~0u : static_cast<unsigned>(b[i]);
    if (ua != ub) return ua < ub;
  }
  return a.size() < b.size();
}

}  // namespace detail

/// Enumerates every complete matching of min(m, n) pairs and keeps the one
/// with the best objective; exact ties resolve to the lexicographically
/// smallest row_to_col (unmatched rows sort last). `objective` receives the
/// full candidate and returns the value to optimize. Exponential in
/// min(m, n); callers keep sizes small.
inline Injection best_injection_exhaustive(
    int m, int n, const std::function<double(const std::vector<int>&)>& objective,
    bool maximize) {
  if (m < 0 || n < 0 || m > 16 || n > 16)
    throw Error("best_injection_exhaustive: size out of range");
  Injection best;
  bool have_best = false;
  std::vector<int> row_to_col(static_cast<std::size_t>(m), -1);

  auto consider = [&]() {
    double value = objective(row_to_col);
    if (!have_best) {
      best = {row_to_col, value};
      have_best = true;
      return;
    }
    bool better = maximize ? value > best.total : value < best.total;
    bool tie = value == best.total;
    if (better || (tie && detail::seq_less(row_to_col, best.row_to_col)))
      best = {row_to_col, value};
  };

  if (m <= n) {
    // Assign every row a distinct column.
    std::function<void(int, unsigned)> rec = [&](int row, unsigned used) {
      if (row == m) {
        consider();
        return;
      }
      for (int j = 0; j < n; ++j) {
        if (used & (1u << j)) continue;
        row_to_col[static_cast<std::size_t>(row)] = j;
        rec(row + 1, used | (1u << j));
      }
      row_to_col[static_cast<std::size_t>(row)] = -1;
    };
    rec(0, 0u);
  } else {
    // More rows than columns: assign every column a distinct row.
    std::vector<int> col_to_row(static_cast<std::size_t>(n), -1);
    std::function<void(int, unsigned)> rec = [&](int col, unsigned used) {
      if (col == n) {
        std::fill(row_to_col.begin(), row_to_col.end(), -1);
        for (int j = 0; j < n; ++j)
          row_to_col[static_cast<std::size_t>(col_to_row[static_cast<std::size_t>(j)])] = j;
        consider();
        return;
      }
      for (int i = 0; i < m; ++i) {
        if (used & (1u << i)) continue;
        col_to_row[static_cast<std::size_t>(col)] = i;
        rec(col + 1, used | (1u << i));
      }
    };
    rec(0, 0u);
  }
  if (!have_best) {
    // min(m, n) == 0: the empty matching.
    best.row_to_col = row_to_col;
    best.total = objective(row_to_col);
  }
  return best;
}

/// Assignment-solver path for pairwise-additive objectives: pads the score
/// matrix square, solves exactly, then pairs any zero-gain leftovers in
/// index order so the matching always covers min(m, n) pairs. Requires
/// nonnegative scores.
inline Injection best_injection_assignment(
    const std::vector<std::vector<double>>& score) {
  const int m = static_cast<int>(score.size());
  const int n = m == 0 ? 0 : static_cast<int>(score[0].size());
  const int size = std::max(m, n);
  Injection out;
  out.row_to_col.assign(static_cast<std::size_t>(m), -1);
  if (size == 0) return out;

  std::vector<std::vector<double>> padded(
      static_cast<std::size_t>(size),
      std::vector<double>(static_cast<std::size_t>(size), 0.0));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      padded[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          score[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  std::vector<int> assignment = solve_max_square(padded);

  std::vector<char> col_used(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < m; ++i) {
    int j = assignment[static_cast<std::size_t>(i)];
    if (j < n) {
      out.row_to_col[static_cast<std::size_t>(i)] = j;
      col_used[static_cast<std::size_t>(j)] = 1;
    }
  }
  // Rows matched to padding columns swap onto leftover real columns; the
  // exchanged pairs necessarily score zero, or the solution was not optimal.
  if (m <= n) {
    int next_free = 0;
    for (int i = 0; i < m; ++i) {
      if (out.row_to_col[static_cast<std::size_t>(i)] >= 0) continue;
      while (next_free < n && col_used[static_cast<std::size_t>(next_free)])
        next_free++;
      out.row_to_col[static_cast<std::size_t>(i)] = next_free;
      col_used[static_cast<std::size_t>(next_free)] = 1;
    }
  }
  out.total = 0.0;
  for (int i = 0; i < m; ++i) {
    int j = out.row_to_col[static_cast<std::size_t>(i)];
    if (j >= 0)
      out.total += score[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace foascene::assign

#endif  // FOASCENE_ASSIGNMENT_HPP_
