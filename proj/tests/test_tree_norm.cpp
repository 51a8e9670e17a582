#include <gtest/gtest.h>

#include "support/testing.hpp"

using namespace tmdcore;
using tmdtest::close;
using tmdtest::make_cfg;

TEST(TreeNorm, Examples) {
  const Graph single = make_graph(1, {}, {{5}});
  for (std::size_t L = 1; L <= 4; ++L) EXPECT_EQ(tree_norm(single, make_cfg(L)).value, 5.0);
  EXPECT_EQ(tree_norm(make_graph(2, {{0, 1}}, {{1}, {1}}), make_cfg(2)).value, 4.0);
  const Graph k3f = make_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {{3}, {1}, {1}});
  EXPECT_EQ(tree_norm(k3f, make_cfg(2)).value, 15.0);
  EXPECT_EQ(tree_norm(empty_graph(1), make_cfg(3)).value, 0.0);
}

TEST(TreeNorm, Batch) {
  const auto cfg = make_cfg(2);
  EXPECT_TRUE(tree_norm_batch(Dataset{}, cfg).empty());
  const Dataset ds = make_dataset("b", {make_graph(2, {{0, 1}}, {{1}, {1}}),
                                        make_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {{1}, {1}, {1}})});
  EXPECT_EQ(tree_norm_batch(ds, cfg), (std::vector<double>{4.0, 9.0}));
}

TEST(TreeNorm, MatchesNaive) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 80; ++t) {
    const std::size_t L = 1 + t % 4;
    const auto cfg = make_cfg(L, tmdtest::random_weights(rng, L), t % 2 ? FeatureNorm::l1 : FeatureNorm::l2);
    const Graph g = tmdtest::random_graph(rng, 0, 7, 0.4, 2);
    EXPECT_TRUE(close(tree_norm(g, cfg).value, tree_norm_naive(g, cfg))) << "trial " << t;
  }
}

TEST(TreeNorm, Conservation) {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 50; ++t) {
    const auto cfg = make_cfg(3, tmdtest::random_weights(rng, 3));
    const Graph g = tmdtest::random_graph(rng, 1, 8, 0.4, 2);
    const auto s = tmdtest::random_subset(rng, g.node_count);
    const double full = tree_norm(g, cfg).value;
    EXPECT_TRUE(close(full, tmd(g, induced_subgraph(g, s), cfg) + tree_norm(induced_subgraph(g, s), cfg).value));
  }
}

TEST(TreeNorm, AddingEdgeNeverDecreases) {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 30; ++t) {
    Graph g = tmdtest::random_graph(rng, 2, 8, 0.3, 1, 1.0, 1.0);
    std::vector<std::pair<NodeId, NodeId>> missing;
    for (NodeId u = 0; u < g.node_count; ++u) {
      for (NodeId v = u + 1; v < g.node_count; ++v) {
        if (std::find(g.edges.begin(), g.edges.end(), Edge{u, v}) == g.edges.end()) missing.emplace_back(u, v);
      }
    }
    if (missing.empty()) continue;
    const double before = tree_norm(g, make_cfg(3)).value;
    g.edges.push_back({missing[0].first, missing[0].second});
    std::sort(g.edges.begin(), g.edges.end());
    EXPECT_GE(tree_norm(g, make_cfg(3)).value, before);
  }
}

TEST(TreeNorm, LinearInFeatureScale) {
  std::mt19937_64 rng(34);
  for (int t = 0; t < 20; ++t) {
    Graph g = tmdtest::random_graph(rng, 1, 8, 0.4, 2);
    const double before = tree_norm(g, make_cfg(3)).value;
    for (double& f : g.features) f *= 2.5;
    EXPECT_TRUE(close(tree_norm(g, make_cfg(3)).value, 2.5 * before));
  }
}

TEST(TreeNorm, OverflowIsReported) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < 6; ++u) {
    for (NodeId v = u + 1; v < 6; ++v) edges.emplace_back(u, v);
  }
  const Graph k6 = make_graph(6, edges, std::vector<std::vector<double>>(6, {1e300}));
  EXPECT_THROW(tree_norm(k6, make_cfg(50)), NumericError);
}
