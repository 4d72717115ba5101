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

#include "foascene/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "foascene/rng.hpp"

namespace {

using foascene::Rng;
namespace assign = foascene::assign;

// Oracle: best total over all complete matchings, via std::next_permutation
// rather than the library's own enumeration.
double oracle_best_total(const std::vector<std::vector<double>>& score,
                         bool maximize) {
  const int m = static_cast<int>(score.size());
  const int n = m == 0 ? 0 : static_cast<int>(score[0].size());
  if (m == 0 || n == 0) return 0.0;
  double best = maximize ? -1e300 : 1e300;
  if (m <= n) {
    std::vector<int> cols(static_cast<std::size_t>(n));
    std::iota(cols.begin(), cols.end(), 0);
    std::sort(cols.begin(), cols.end());
    do {
      double total = 0.0;
      for (int i = 0; i < m; ++i)
        total += score[static_cast<std::size_t>(i)]
                      [static_cast<std::size_t>(cols[static_cast<std::size_t>(i)])];
      best = maximize ? std::max(best, total) : std::min(best, total);
    } while (std::next_permutation(cols.begin(), cols.end()));
  } else {
    std::vector<int> rows(static_cast<std::size_t>(m));
    std::iota(rows.begin(), rows.end(), 0);
    do {
      double total = 0.0;
      for (int j = 0; j < n; ++j)
        total += score[static_cast<std::size_t>(rows[static_cast<std::size_t>(j)])]
                      [static_cast<std::size_t>(j)];
      best = maximize ? std::max(best, total) : std::min(best, total);
    } while (std::next_permutation(rows.begin(), rows.end()));
  }
  return best;
}

std::vector<std::vector<double>> random_matrix(Rng& rng, int m, int n,
                                               bool coarse) {
  std::vector<std::vector<double>> a(static_cast<std::size_t>(m),
                                     std::vector<double>(static_cast<std::size_t>(n)));
  for (auto& row : a)
    for (auto& v : row)
      v = coarse ? static_cast<double>(rng.uniform_int(0, 4)) / 4.0
                 : rng.uniform();
  return a;
}

double injection_total(const std::vector<std::vector<double>>& score,
                       const assign::Injection& inj) {
  double total = 0.0;
  for (std::size_t i = 0; i < inj.row_to_col.size(); ++i) {
    int j = inj.row_to_col[i];
    if (j >= 0) total += score[i][static_cast<std::size_t>(j)];
  }
  return total;
}

}  // namespace

TEST_CASE("square solver matches brute force", "[assignment]") {
  Rng rng(0x5151u);
  for (int n = 1; n <= 7; ++n) {
    for (int trial = 0; trial < 40; ++trial) {
      auto cost = random_matrix(rng, n, n, trial % 2 == 0);
      auto perm_min = assign::solve_min_square(cost);
      auto perm_max = assign::solve_max_square(cost);
      double got_min = 0.0, got_max = 0.0;
      std::vector<char> used_min(static_cast<std::size_t>(n), 0);
      std::vector<char> used_max(static_cast<std::size_t>(n), 0);
      for (int i = 0; i < n; ++i) {
        int jm = perm_min[static_cast<std::size_t>(i)];
        int jM = perm_max[static_cast<std::size_t>(i)];
        REQUIRE(jm >= 0);
        REQUIRE(jm < n);
        REQUIRE(!used_min[static_cast<std::size_t>(jm)]);
        REQUIRE(!used_max[static_cast<std::size_t>(jM)]);
        used_min[static_cast<std::size_t>(jm)] = 1;
        used_max[static_cast<std::size_t>(jM)] = 1;
        got_min += cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(jm)];
        got_max += cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(jM)];
      }
      REQUIRE_THAT(got_min, Catch::Matchers::WithinAbs(
                                oracle_best_total(cost, false), 1e-9));
      REQUIRE_THAT(got_max, Catch::Matchers::WithinAbs(
                                oracle_best_total(cost, true), 1e-9));
    }
  }
}

TEST_CASE("exhaustive injection matches oracle on rectangles",
          "[assignment]") {
  Rng rng(0xabcdu);
  for (int trial = 0; trial < 200; ++trial) {
    int m = static_cast<int>(rng.uniform_int(0, 5));
    int n = static_cast<int>(rng.uniform_int(0, 5));
    auto score = random_matrix(rng, m, n, trial % 3 == 0);
    auto objective = [&](const std::vector<int>& row_to_col) {
      double total = 0.0;
      for (int i = 0; i < m; ++i) {
        int j = row_to_col[static_cast<std::size_t>(i)];
        if (j >= 0)
          total += score[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
      return total;
    };
    auto inj = assign::best_injection_exhaustive(m, n, objective, true);
    REQUIRE(inj.row_to_col.size() == static_cast<std::size_t>(m));
    REQUIRE_THAT(injection_total(score, inj),
                 Catch::Matchers::WithinAbs(oracle_best_total(score, true),
                                            1e-12));
    int matched = 0;
    for (int j : inj.row_to_col)
      if (j >= 0) matched++;
    REQUIRE(matched == std::min(m, n));
  }
}

TEST_CASE("assignment path equals exhaustive on nonnegative scores",
          "[assignment]") {
  Rng rng(0x777u);
  for (int trial = 0; trial < 300; ++trial) {
    int m = static_cast<int>(rng.uniform_int(1, 8));
    int n = static_cast<int>(rng.uniform_int(1, 8));
    auto score = random_matrix(rng, m, n, trial % 2 == 0);
    auto fast = assign::best_injection_assignment(score);
    REQUIRE_THAT(injection_total(score, fast),
                 Catch::Matchers::WithinAbs(oracle_best_total(score, true),
                                            1e-9));
    int matched = 0;
    for (std::size_t i = 0; i < fast.row_to_col.size(); ++i) {
      int j = fast.row_to_col[i];
      if (j >= 0) {
        REQUIRE(j < n);
        matched++;
      }
    }
    REQUIRE(matched == std::min(m, n));
    // No column reused.
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    for (int j : fast.row_to_col) {
      if (j < 0) continue;
      REQUIRE(!used[static_cast<std::size_t>(j)]);
      used[static_cast<std::size_t>(j)] = 1;
    }
  }
}

TEST_CASE("tied optima resolve to the smallest column sequence",
          "[assignment]") {
  // All-equal scores: every matching ties, so rows take columns in order.
  auto objective_for = [](const std::vector<std::vector<double>>& score) {
    return [&score](const std::vector<int>& row_to_col) {
      double total = 0.0;
      for (std::size_t i = 0; i < row_to_col.size(); ++i) {
        int j = row_to_col[i];
        if (j >= 0) total += score[i][static_cast<std::size_t>(j)];
      }
      return total;
    };
  };
  std::vector<std::vector<double>> flat(3, std::vector<double>(3, 0.5));
  auto obj = objective_for(flat);
  auto inj = assign::best_injection_exhaustive(3, 3, obj, true);
  REQUIRE(inj.row_to_col == std::vector<int>{0, 1, 2});

  std::vector<std::vector<double>> wide(2, std::vector<double>(4, 1.0));
  auto obj2 = objective_for(wide);
  auto inj2 = assign::best_injection_exhaustive(2, 4, obj2, true);
  REQUIRE(inj2.row_to_col == std::vector<int>{0, 1});

  std::vector<std::vector<double>> tall(4, std::vector<double>(2, 1.0));
  auto obj3 = objective_for(tall);
  auto inj3 = assign::best_injection_exhaustive(4, 2, obj3, true);
  // Unmatched rows sort last, so the first two rows take the columns.
  REQUIRE(inj3.row_to_col == std::vector<int>{0, 1, -1, -1});
}

TEST_CASE("degenerate shapes", "[assignment]") {
  auto zero_obj = [](const std::vector<int>&) { return 0.0; };
  auto empty = assign::best_injection_exhaustive(0, 3, zero_obj, true);
  REQUIRE(empty.row_to_col.empty());
  auto empty2 = assign::best_injection_exhaustive(3, 0, zero_obj, true);
  REQUIRE(empty2.row_to_col == std::vector<int>{-1, -1, -1});

  std::vector<std::vector<double>> one{{0.25}};
  auto inj = assign::best_injection_assignment(one);
  REQUIRE(inj.row_to_col == std::vector<int>{0});
  REQUIRE_THAT(inj.total, Catch::Matchers::WithinAbs(0.25, 1e-15));
}
