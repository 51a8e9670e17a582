#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tmdcore/errors.hpp"

namespace tmdcore {

using NodeId = std::size_t;

// Undirected edge; canonical form has u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  auto operator<=>(const Edge&) const = default;
};

// Compressed sparse rows over an undirected edge list. Neighbor lists are
// sorted ascending, which every deterministic traversal in the library relies on.
class Adjacency {
 public:
  Adjacency() = default;

  Adjacency(std::size_t node_count, std::span<const Edge> edges)
      : offsets_(node_count + 1, 0) {
    for (const Edge& e : edges) {
      ++offsets_[e.u + 1];
      ++offsets_[e.v + 1];
    }
    for (std::size_t i = 0; i < node_count; ++i) offsets_[i + 1] += offsets_[i];
    targets_.resize(offsets_.back());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const Edge& e : edges) {
      targets_[cursor[e.u]++] = e.v;
      targets_[cursor[e.v]++] = e.u;
    }
    for (std::size_t i = 0; i < node_count; ++i) {
      std::sort(targets_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                targets_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
    }
  }

  std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {targets_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }

  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

  std::size_t max_degree() const {
    std::size_t best = 0;
    for (NodeId v = 0; v < node_count(); ++v) best = std::max(best, degree(v));
    return best;
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
};

// Undirected attributed graph with dense node features (row-major).
struct Graph {
  std::int64_t id = 0;
  std::size_t node_count = 0;
  std::size_t feature_dim = 1;
  std::vector<Edge> edges;
  std::vector<double> features;
  std::optional<std::int64_t> label;

  std::span<const double> feature(NodeId v) const {
    return {features.data() + v * feature_dim, feature_dim};
  }

  Adjacency adjacency() const { return Adjacency(node_count, edges); }

  bool operator==(const Graph&) const = default;
};

/// Lists every broken invariant of `g`; an empty result means the graph is valid.
inline std::vector<std::string> validate(const Graph& g) {
  std::vector<std::string> violations;
  if (g.feature_dim == 0) violations.emplace_back("feature dimension must be at least 1");
  if (g.features.size() != g.node_count * g.feature_dim) {
    std::ostringstream os;
    os << "feature row count mismatch: expected " << g.node_count << " rows of width "
       << g.feature_dim << ", got " << g.features.size() << " values";
    violations.push_back(os.str());
  }
  for (std::size_t i = 0; i < g.features.size(); ++i) {
    if (!std::isfinite(g.features[i])) {
      std::ostringstream os;
      os << "non-finite feature value at flat index " << i;
      violations.push_back(os.str());
      break;
    }
  }
  std::vector<Edge> canon;
  canon.reserve(g.edges.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const Edge& e = g.edges[i];
    if (e.u == e.v) {
      std::ostringstream os;
      os << "edge " << i << ": self-loop at node " << e.u;
      violations.push_back(os.str());
      continue;
    }
    if (e.u >= g.node_count || e.v >= g.node_count) {
      std::ostringstream os;
      os << "edge " << i << ": endpoint out of range (" << e.u << "," << e.v << ") for "
         << g.node_count << " nodes";
      violations.push_back(os.str());
      continue;
    }
    canon.push_back({std::min(e.u, e.v), std::max(e.u, e.v)});
  }
  std::sort(canon.begin(), canon.end());
  for (std::size_t i = 1; i < canon.size(); ++i) {
    if (canon[i] == canon[i - 1]) {
      std::ostringstream os;
      os << "duplicate edge (" << canon[i].u << "," << canon[i].v << ")";
      violations.push_back(os.str());
    }
  }
  return violations;
}

inline void require_valid(const Graph& g) {
  auto violations = validate(g);
  if (violations.empty()) return;
  std::string msg = "invalid graph " + std::to_string(g.id) + ":";
  for (const auto& v : violations) msg += " " + v + ";";
  throw InputError(msg);
}

inline Graph empty_graph(std::size_t feature_dim) {
  Graph g;
  g.feature_dim = feature_dim;
  return g;
}

/// Builds a validated graph. Edges are canonicalized to (min, max) and sorted;
/// `rows` must hold one feature vector per node, all of the same width.
/// A graph without nodes takes `empty_dim` as its feature dimension.
inline Graph make_graph(std::size_t node_count,
                        const std::vector<std::pair<NodeId, NodeId>>& edges,
                        const std::vector<std::vector<double>>& rows,
                        std::optional<std::int64_t> label = std::nullopt,
                        std::size_t empty_dim = 1) {
  if (rows.size() != node_count) {
    throw InputError("expected " + std::to_string(node_count) + " feature rows, got " +
                     std::to_string(rows.size()));
  }
  Graph g;
  g.node_count = node_count;
  g.feature_dim = rows.empty() ? empty_dim : rows.front().size();
  g.label = label;
  g.features.reserve(node_count * g.feature_dim);
  for (const auto& row : rows) {
    if (row.size() != g.feature_dim) throw InputError("ragged feature rows within a graph");
    g.features.insert(g.features.end(), row.begin(), row.end());
  }
  g.edges.reserve(edges.size());
  for (auto [u, v] : edges) g.edges.push_back({std::min(u, v), std::max(u, v)});
  std::sort(g.edges.begin(), g.edges.end());
  require_valid(g);
  return g;
}

/// Subgraph induced by `nodes`; kept nodes follow ascending original index.
inline Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  std::vector<NodeId> keep(nodes.begin(), nodes.end());
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  if (!keep.empty() && keep.back() >= g.node_count) {
    throw InputError("subset index " + std::to_string(keep.back()) + " out of range for " +
                     std::to_string(g.node_count) + " nodes");
  }
  constexpr NodeId kDropped = static_cast<NodeId>(-1);
  std::vector<NodeId> remap(g.node_count, kDropped);
  for (std::size_t i = 0; i < keep.size(); ++i) remap[keep[i]] = i;

  Graph sub;
  sub.id = g.id;
  sub.label = g.label;
  sub.node_count = keep.size();
  sub.feature_dim = g.feature_dim;
  sub.features.reserve(keep.size() * g.feature_dim);
  for (NodeId v : keep) {
    auto f = g.feature(v);
    sub.features.insert(sub.features.end(), f.begin(), f.end());
  }
  for (const Edge& e : g.edges) {
    if (remap[e.u] != kDropped && remap[e.v] != kDropped) {
      sub.edges.push_back({remap[e.u], remap[e.v]});
    }
  }
  // remap is monotone, so canonical (u < v) sorted order is preserved.
  return sub;
}

struct TreeNode {
  std::vector<double> feature;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  NodeId origin = 0;  // graph node this tree node unrolls
};

// Explicit rooted tree; node 0 is the root.
struct RootedTree {
  std::vector<TreeNode> nodes;
  std::size_t depth = 1;

  // Levels below and including `node`: 1 for a leaf.
  std::size_t height(std::size_t node) const {
    std::size_t h = 0;
    for (std::size_t c : nodes[node].children) h = std::max(h, height(c));
    return h + 1;
  }
};

inline RootedTree blank_tree(std::size_t feature_dim) {
  RootedTree t;
  t.nodes.push_back({std::vector<double>(feature_dim, 0.0), std::nullopt, {}, 0});
  t.depth = 1;
  return t;
}

/// Depth-`depth` unrolling of the neighborhood of `root`; every leaf above the
/// last level gains one child per graph neighbor, revisits included.
inline RootedTree computation_tree(const Graph& g, NodeId root, std::size_t depth) {
  if (root >= g.node_count) throw InputError("computation tree root out of range");
  if (depth == 0) throw ConfigError("computation tree depth must be at least 1");
  const Adjacency adj = g.adjacency();
  RootedTree t;
  auto f = g.feature(root);
  t.nodes.push_back({std::vector<double>(f.begin(), f.end()), std::nullopt, {}, root});
  std::vector<std::size_t> frontier{0};
  for (std::size_t level = 2; level <= depth; ++level) {
    std::vector<std::size_t> next;
    for (std::size_t leaf : frontier) {
      for (NodeId u : adj.neighbors(t.nodes[leaf].origin)) {
        auto fu = g.feature(u);
        t.nodes.push_back({std::vector<double>(fu.begin(), fu.end()), leaf, {}, u});
        t.nodes[leaf].children.push_back(t.nodes.size() - 1);
        next.push_back(t.nodes.size() - 1);
      }
    }
    frontier = std::move(next);
  }
  t.depth = t.height(0);
  return t;
}

struct Dataset {
  std::string name;
  std::size_t feature_dim = 0;  // 0 only for an empty dataset
  std::vector<Graph> graphs;

  std::size_t size() const { return graphs.size(); }
  bool empty() const { return graphs.empty(); }
  const Graph& operator[](std::size_t i) const { return graphs[i]; }
  bool operator==(const Dataset&) const = default;
};

/// Validates every graph and the shared feature dimension. Graphs without
/// nodes carry no feature rows and adopt the dataset dimension.
inline Dataset make_dataset(std::string name, std::vector<Graph> graphs) {
  Dataset ds;
  ds.name = std::move(name);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    require_valid(graphs[i]);
    if (graphs[i].node_count == 0) continue;
    if (ds.feature_dim == 0) {
      ds.feature_dim = graphs[i].feature_dim;
    } else if (graphs[i].feature_dim != ds.feature_dim) {
      throw InputError("graph " + std::to_string(i) + " has feature dimension " +
                       std::to_string(graphs[i].feature_dim) + ", dataset uses " +
                       std::to_string(ds.feature_dim));
    }
  }
  if (ds.feature_dim == 0 && !graphs.empty()) ds.feature_dim = graphs.front().feature_dim;
  for (Graph& g : graphs) {
    if (g.node_count == 0) g.feature_dim = ds.feature_dim;
  }
  ds.graphs = std::move(graphs);
  return ds;
}

}  // namespace tmdcore
