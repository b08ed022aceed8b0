// Copyright 2026 The dpmorse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include "dpmorse/metrics.hpp"
#include "test_support.hpp"

namespace dpmorse {
namespace {

using Table = std::vector<std::vector<std::int64_t>>;

TEST(Contingency, Examples) {
  EXPECT_EQ(contingency(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 0, 1, 1}).table, (Table{{2, 0}, {0, 2}}));
  EXPECT_EQ(contingency(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}).table, (Table{{1, 1}, {1, 1}}));
  const Contingency one = contingency(std::vector<int>{3}, std::vector<int>{7});
  EXPECT_EQ(one.table, (Table{{1}}));
  EXPECT_EQ(one.total, 1);
}

TEST(Contingency, LengthMismatch) {
  EXPECT_THROW(contingency(std::vector<int>{0}, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST(Ari, PermutationInvariant) {
  EXPECT_EQ(adjusted_rand_index(std::vector<int>{0, 0, 1, 1}, std::vector<int>{1, 1, 0, 0}), 1.0);
}

TEST(Ari, AntiCorrelatedHalf) {
  // Hand count over the 6 pairs: index 0, expected 2/6, max 2.
  EXPECT_EQ(adjusted_rand_index(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}), -0.5);
}

TEST(Ari, SelfIsOne) {
  const std::vector<int> a{3, 1, 1, 2, 3, 3, 0};
  EXPECT_EQ(adjusted_rand_index(a, a), 1.0);
}

TEST(Ari, DegenerateFlagged) {
  const AriResult r = adjusted_rand_index_detail(std::vector<int>{0, 0, 0}, std::vector<int>{1, 1, 1});
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.value, 0.0);
}

TEST(Ari, MatchesBruteForcePairCounting) {
  RandomStream rng(55);
  for (int c = 0; c < 500; ++c) {
    const auto n = static_cast<std::size_t>(2 + rng.engine()() % 9);
    const auto ka = 1 + rng.engine()() % 4;
    const auto kb = 1 + rng.engine()() % 4;
    std::vector<int> a(n);
    std::vector<int> b(n);
    for (auto& x : a) x = static_cast<int>(rng.engine()() % ka);
    for (auto& x : b) x = static_cast<int>(rng.engine()() % kb);
    EXPECT_NEAR(adjusted_rand_index(a, b), testing::brute_force_ari(a, b), 1e-12) << "case " << c;
  }
}

TEST(Ari, SymmetricInArguments) {
  RandomStream rng(56);
  for (int c = 0; c < 100; ++c) {
    std::vector<int> a(12);
    std::vector<int> b(12);
    for (auto& x : a) x = static_cast<int>(rng.engine()() % 3);
    for (auto& x : b) x = static_cast<int>(rng.engine()() % 4);
    EXPECT_EQ(adjusted_rand_index(a, b), adjusted_rand_index(b, a));
  }
}

}  // namespace
}  // namespace dpmorse
