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

#include "dpmorse/merge.hpp"
#include "test_support.hpp"

namespace dpmorse {
namespace {

TransitionRecord record(Eigen::Index a, Eigen::Index b, double f) {
  TransitionRecord r;
  r.a = a;
  r.b = b;
  r.f_value = f;
  return r;
}

TEST(BuildGraph, NoRecordsIsEdgeless) {
  const AdjacencyGraph g = build_graph(3, std::vector<TransitionRecord>{});
  EXPECT_EQ(g.n, 3);
  EXPECT_TRUE(g.edges.empty());
  EXPECT_EQ(g.weight(0, 1), kInf);
}

TEST(BuildGraph, SingleRecord) {
  const AdjacencyGraph g = build_graph(2, std::vector<TransitionRecord>{record(0, 1, 2.3)});
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.weight(1, 0), 2.3);
}

TEST(BuildGraph, DuplicatesKeepMinimum) {
  const AdjacencyGraph g =
      build_graph(3, std::vector<TransitionRecord>{record(0, 1, 2.3), record(1, 0, 1.7), record(0, 1, 4.0)});
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.weight(0, 1), 1.7);
}

TEST(BuildGraph, LinksAddCenterEdges) {
  const AdjacencyGraph g = build_graph(3, std::vector<TransitionRecord>{record(0, 1, 2.0)},
                                       std::vector<CenterLink>{{2, 0, 1.5}});
  EXPECT_EQ(g.weight(0, 2), 1.5);
}

TEST(BuildGraph, BadEdgesRejected) {
  EXPECT_THROW(build_graph(2, std::vector<Edge>{{0, 2, 1.0}}), std::out_of_range);
  EXPECT_THROW(build_graph(2, std::vector<Edge>{{1, 1, 1.0}}), std::invalid_argument);
}

TEST(MergeToK, HandTrace) {
  const AdjacencyGraph g = build_graph(3, std::vector<Edge>{{0, 1, 0.2}, {1, 2, 0.9}});
  const MergeResult r = merge_to_k(g, 2);
  EXPECT_EQ(r.labels, (std::vector<int>{0, 0, 1}));
  EXPECT_EQ(r.clusters, 2);
  ASSERT_EQ(r.dendrogram.merges.size(), 1u);
  EXPECT_EQ(r.dendrogram.merges[0].weight, 0.2);
}

TEST(MergeToK, TargetNIsIdentity) {
  const AdjacencyGraph g = build_graph(4, std::vector<Edge>{{0, 1, 0.2}, {2, 3, 0.5}});
  const MergeResult r = merge_to_k(g, 4);
  EXPECT_EQ(r.labels, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_TRUE(r.dendrogram.merges.empty());
}

TEST(MergeToK, EdgelessStopsDisconnected) {
  const MergeResult r = merge_to_k(build_graph(3, std::vector<Edge>{}), 1);
  EXPECT_TRUE(r.disconnected);
  EXPECT_EQ(r.clusters, 3);
}

TEST(MergeToK, TargetOutOfRange) {
  const AdjacencyGraph g = build_graph(3, std::vector<Edge>{});
  EXPECT_THROW(merge_to_k(g, 0), std::invalid_argument);
  EXPECT_THROW(merge_to_k(g, 4), std::invalid_argument);
}

TEST(Dendrogram, ChainFollowsWeights) {
  const AdjacencyGraph g = build_graph(4, std::vector<Edge>{{0, 1, 2.0}, {1, 2, 1.0}, {2, 3, 3.0}});
  const Dendrogram d = full_dendrogram(g);
  ASSERT_EQ(d.merges.size(), 3u);
  EXPECT_EQ(d.merges[0].weight, 1.0);
  EXPECT_EQ(d.merges[1].weight, 2.0);
  EXPECT_EQ(d.merges[2].weight, 3.0);
  EXPECT_EQ(cut_dendrogram(d, 2), (std::vector<int>{0, 0, 0, 1}));
}

TEST(Dendrogram, RenderListsEveryNode) {
  const Dendrogram d = full_dendrogram(build_graph(3, std::vector<Edge>{{0, 1, 0.5}, {1, 2, 0.7}}));
  const std::string text = render_dendrogram(d);
  EXPECT_NE(text.find("node 4 (weight 0.7)"), std::string::npos) << text;
  for (const char* leaf : {"leaf 0", "leaf 1", "leaf 2"}) EXPECT_NE(text.find(leaf), std::string::npos);
}

TEST(MergeProperty, MatchesMstCutOracle) {
  RandomStream rng(17);
  for (int c = 0; c < 100; ++c) {
    const Eigen::Index n = 2 + c % 7;
    const AdjacencyGraph g = testing::random_connected_graph(rng, n);
    const Dendrogram d = full_dendrogram(g);
    EXPECT_EQ(static_cast<Eigen::Index>(d.merges.size()), n - 1);
    for (Eigen::Index k = 1; k <= n; ++k) {
      const MergeResult r = merge_to_k(g, k);
      EXPECT_TRUE(testing::same_partition(r.labels, testing::mst_cut_oracle(g, k))) << "graph " << c << " k " << k;
      EXPECT_EQ(r.labels, cut_dendrogram(d, k)) << "graph " << c << " k " << k;
    }
    for (std::size_t s = 1; s < d.merges.size(); ++s) EXPECT_LE(d.merges[s - 1].weight, d.merges[s].weight);
  }
}

}  // namespace
}  // namespace dpmorse
