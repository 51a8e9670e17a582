#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tmdcore/config.hpp"
#include "tmdcore/distance_matrix.hpp"
#include "tmdcore/errors.hpp"
#include "tmdcore/graph.hpp"
#include "tmdcore/matching.hpp"
#include "tmdcore/parallel.hpp"
#include "tmdcore/tree_norm.hpp"

namespace tmdcore {

namespace detail {

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

// Total order on graph contents; tmd evaluates every pair in this order so
// that swapping the arguments replays the identical floating-point program.
inline bool canonical_less(const Graph& a, const Graph& b) {
  if (a.node_count != b.node_count) return a.node_count < b.node_count;
  if (a.feature_dim != b.feature_dim) return a.feature_dim < b.feature_dim;
  if (a.edges != b.edges) return a.edges < b.edges;
  return a.features < b.features;
}

inline void check_dims(const Graph& a, const Graph& b) {
  if (a.node_count > 0 && b.node_count > 0 && a.feature_dim != b.feature_dim) {
    throw InputError("feature dimension mismatch: " + std::to_string(a.feature_dim) + " vs " +
                     std::to_string(b.feature_dim));
  }
}

}  // namespace detail

// Memo of tree distances between the depth-d computation trees of two graphs,
// for d = 1..L. Index `blank_a()` / `blank_b()` stands for the blank tree
// (a single node with an all-zero feature).
class TdTable {
 public:
  TdTable(const Graph& a, const Graph& b, const TmdConfig& cfg)
      : na_(a.node_count), nb_(b.node_count), depth_(cfg.depth) {
    cfg.check();
    detail::check_dims(a, b);
    const Adjacency adj_a = a.adjacency();
    const Adjacency adj_b = b.adjacency();
    const std::size_t cells = (na_ + 1) * (nb_ + 1);
    td_.assign(depth_, std::vector<double>(cells, 0.0));
    transport_.assign(depth_, std::vector<double>(cells, 0.0));

    auto& base = td_[0];
    for (NodeId u = 0; u < na_; ++u) {
      for (NodeId v = 0; v < nb_; ++v) base[cell(u, v)] = distance(a.feature(u), b.feature(v), cfg.norm);
      base[cell(u, nb_)] = norm(a.feature(u), cfg.norm);
    }
    for (NodeId v = 0; v < nb_; ++v) base[cell(na_, v)] = norm(b.feature(v), cfg.norm);

    for (std::size_t d = 2; d <= depth_; ++d) {
      const double w = cfg.weights(d - 1);
      const auto& prev = td_[d - 2];
      auto& cur = td_[d - 1];
      auto& ot = transport_[d - 1];
      // Against a blank, every subtree is matched to a blank: no assignment problem.
      for (NodeId u = 0; u < na_; ++u) {
        double sum = 0.0;
        for (NodeId x : adj_a.neighbors(u)) sum += prev[cell(x, nb_)];
        ot[cell(u, nb_)] = sum;
        cur[cell(u, nb_)] = base[cell(u, nb_)] + w * sum;
      }
      for (NodeId v = 0; v < nb_; ++v) {
        double sum = 0.0;
        for (NodeId y : adj_b.neighbors(v)) sum += prev[cell(na_, y)];
        ot[cell(na_, v)] = sum;
        cur[cell(na_, v)] = base[cell(na_, v)] + w * sum;
      }
      for (NodeId u = 0; u < na_; ++u) {
        for (NodeId v = 0; v < nb_; ++v) {
          const double m = padded_transport(prev, adj_a.neighbors(u), adj_b.neighbors(v));
          ot[cell(u, v)] = m;
          cur[cell(u, v)] = base[cell(u, v)] + w * m;
        }
      }
    }
  }

  std::size_t depth() const { return depth_; }
  std::size_t blank_a() const { return na_; }
  std::size_t blank_b() const { return nb_; }

  /// Tree distance between T_u^d(a) and T_v^d(b).
  double td(std::size_t d, std::size_t u, std::size_t v) const { return td_[d - 1][cell(u, v)]; }

  /// Unweighted optimal transport between the padded child multisets of
  /// T_u^d(a) and T_v^d(b); zero at d = 1.
  double child_transport(std::size_t d, std::size_t u, std::size_t v) const {
    return transport_[d - 1][cell(u, v)];
  }

  /// Padded matching of all depth-L trees of a against those of b.
  MatchingResult top_level() const {
    const std::size_t q = std::max(na_, nb_);
    CostMatrix c(q);
    for (std::size_t i = 0; i < q; ++i) {
      const std::size_t u = i < na_ ? i : na_;
      for (std::size_t j = 0; j < q; ++j) {
        const std::size_t v = j < nb_ ? j : nb_;
        c(i, j) = td(depth_, u, v);
      }
    }
    return min_cost_matching(c);
  }

 private:
  std::size_t cell(std::size_t u, std::size_t v) const { return u * (nb_ + 1) + v; }

  double padded_transport(const std::vector<double>& prev, std::span<const NodeId> xs,
                          std::span<const NodeId> ys) const {
    const std::size_t q = std::max(xs.size(), ys.size());
    if (q == 0) return 0.0;
    if (xs.empty() || ys.empty()) {
      double sum = 0.0;
      for (NodeId x : xs) sum += prev[cell(x, nb_)];
      for (NodeId y : ys) sum += prev[cell(na_, y)];
      return sum;
    }
    CostMatrix c(q);
    for (std::size_t i = 0; i < q; ++i) {
      const std::size_t x = i < xs.size() ? xs[i] : na_;
      for (std::size_t j = 0; j < q; ++j) {
        const std::size_t y = j < ys.size() ? ys[j] : nb_;
        c(i, j) = prev[cell(x, y)];
      }
    }
    return min_cost_matching(c).total_cost;
  }

  std::size_t na_;
  std::size_t nb_;
  std::size_t depth_;
  std::vector<std::vector<double>> td_;
  std::vector<std::vector<double>> transport_;
};

/// Tree mover's distance by bottom-up dynamic programming over depths 1..L;
/// computation trees are never materialized. Symmetric bit-for-bit.
inline double tmd(const Graph& a, const Graph& b, const TmdConfig& cfg) {
  detail::check_dims(a, b);
  if (detail::canonical_less(b, a)) return TdTable(b, a, cfg).top_level().total_cost;
  return TdTable(a, b, cfg).top_level().total_cost;
}

namespace detail {

struct TreeRef {
  const RootedTree* tree = nullptr;  // null: blank tree
  std::size_t node = 0;
};

class ExplicitTreeDistance {
 public:
  ExplicitTreeDistance(const TmdConfig& cfg, std::size_t feature_dim)
      : cfg_(cfg), zero_(feature_dim, 0.0) {}

  double operator()(TreeRef a, TreeRef b) const {
    const std::span<const double> fa = a.tree ? std::span<const double>(a.tree->nodes[a.node].feature)
                                              : std::span<const double>(zero_);
    const std::span<const double> fb = b.tree ? std::span<const double>(b.tree->nodes[b.node].feature)
                                              : std::span<const double>(zero_);
    const double root = distance(fa, fb, cfg_.norm);
    const std::size_t ha = a.tree ? a.tree->height(a.node) : 1;
    const std::size_t hb = b.tree ? b.tree->height(b.node) : 1;
    const std::size_t level = std::max(ha, hb);
    if (level <= 1) return root;

    std::vector<TreeRef> ca, cb;
    if (a.tree) {
      for (std::size_t c : a.tree->nodes[a.node].children) ca.push_back({a.tree, c});
    }
    if (b.tree) {
      for (std::size_t c : b.tree->nodes[b.node].children) cb.push_back({b.tree, c});
    }
    const std::size_t q = std::max(ca.size(), cb.size());
    ca.resize(q);
    cb.resize(q);
    CostMatrix costs(q);
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t j = 0; j < q; ++j) costs(i, j) = (*this)(ca[i], cb[j]);
    }
    return root + cfg_.weights(level - 1) * min_cost_matching(costs).total_cost;
  }

 private:
  const TmdConfig& cfg_;
  std::vector<double> zero_;
};

inline void check_tree(const RootedTree& t, const TmdConfig& cfg) {
  if (t.nodes.empty()) throw InputError("rooted tree has no nodes");
  if (t.height(0) > cfg.depth) {
    throw ConfigError("tree of depth " + std::to_string(t.height(0)) + " exceeds configured depth " +
                      std::to_string(cfg.depth));
  }
}

}  // namespace detail

/// Recursive tree distance on explicit trees: root-feature distance plus
/// w(d-1) times the optimal matching of the blank-padded child subtrees,
/// where d is the larger of the two depths.
inline double tree_distance(const RootedTree& a, const RootedTree& b, const TmdConfig& cfg) {
  cfg.check();
  detail::check_tree(a, cfg);
  detail::check_tree(b, cfg);
  if (a.nodes[0].feature.size() != b.nodes[0].feature.size()) {
    throw InputError("tree feature dimensions differ");
  }
  detail::ExplicitTreeDistance td(cfg, a.nodes[0].feature.size());
  return td({&a, 0}, {&b, 0});
}

inline constexpr std::size_t kNaiveMaxNodes = 12;
inline constexpr std::size_t kNaiveMaxDepth = 4;

/// Oracle path: materializes every computation tree, evaluates the tree
/// distance pairwise and solves the padded top-level matching.
inline double tmd_naive(const Graph& a, const Graph& b, const TmdConfig& cfg) {
  cfg.check();
  detail::check_dims(a, b);
  if (a.node_count > kNaiveMaxNodes || b.node_count > kNaiveMaxNodes || cfg.depth > kNaiveMaxDepth) {
    throw SizeError("tmd_naive is limited to 12 nodes per graph and depth 4");
  }
  std::vector<RootedTree> ta, tb;
  for (NodeId v = 0; v < a.node_count; ++v) ta.push_back(computation_tree(a, v, cfg.depth));
  for (NodeId v = 0; v < b.node_count; ++v) tb.push_back(computation_tree(b, v, cfg.depth));
  const std::size_t dim = a.node_count > 0 ? a.feature_dim : b.feature_dim;
  detail::ExplicitTreeDistance td(cfg, dim);
  const std::size_t q = std::max(ta.size(), tb.size());
  CostMatrix c(q);
  for (std::size_t i = 0; i < q; ++i) {
    const detail::TreeRef ra = i < ta.size() ? detail::TreeRef{&ta[i], 0} : detail::TreeRef{};
    for (std::size_t j = 0; j < q; ++j) {
      const detail::TreeRef rb = j < tb.size() ? detail::TreeRef{&tb[j], 0} : detail::TreeRef{};
      c(i, j) = td(ra, rb);
    }
  }
  return min_cost_matching(c).total_cost;
}

inline double tree_norm_naive(const Graph& g, const TmdConfig& cfg) {
  return tmd_naive(g, empty_graph(g.feature_dim), cfg);
}

/// TMD between a graph and its induced subgraph on `nodes`, via the
/// conservation identity ||G|| = TMD(G, G[S]) + ||G[S]||.
inline double tmd_subgraph(const Graph& g, std::span<const NodeId> nodes, const TmdConfig& cfg) {
  const Graph sub = induced_subgraph(g, nodes);
  return tree_norm(g, cfg).value - tree_norm(sub, cfg).value;
}

inline std::string tmd_metric_tag(const TmdConfig& cfg) { return "tmd:" + to_string(cfg.norm); }

inline std::atomic<std::size_t>& pairwise_matrix_calls() {
  static std::atomic<std::size_t> calls{0};
  return calls;
}

/// All pairwise TMD values (i < j). Pairs are evaluated in parallel into
/// fixed slots, so the result is independent of thread count.
inline DistanceMatrix pairwise_matrix(const Dataset& ds, const TmdConfig& cfg) {
  cfg.check();
  if (ds.empty()) throw InputError("pairwise_matrix needs a non-empty dataset");
  ++pairwise_matrix_calls();
  DistanceMatrix dm;
  dm.n = ds.size();
  dm.metric = tmd_metric_tag(cfg);
  dm.depth = static_cast<std::uint32_t>(cfg.depth);
  dm.weight_preset = cfg.weights.preset();
  dm.values.resize(DistanceMatrix::pair_count(dm.n));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(dm.values.size());
  for (std::size_t i = 0; i < dm.n; ++i) {
    for (std::size_t j = i + 1; j < dm.n; ++j) pairs.emplace_back(i, j);
  }
  parallel_for(pairs.size(), [&](std::size_t k) {
    dm.values[k] = tmd(ds[pairs[k].first], ds[pairs[k].second], cfg);
  });
  return dm;
}

}  // namespace tmdcore
