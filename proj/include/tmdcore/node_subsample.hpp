#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tmdcore/config.hpp"
#include "tmdcore/errors.hpp"
#include "tmdcore/graph.hpp"
#include "tmdcore/medoids.hpp"
#include "tmdcore/parallel.hpp"
#include "tmdcore/tree_norm.hpp"

namespace tmdcore {

class CandidateSet {
 public:
  // Adds the sorted form of `nodes`; an already present set keeps its first tag.
  bool add(std::vector<NodeId> nodes, std::string tag) {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    if (!seen_.insert(nodes).second) return false;
    subsets.push_back(std::move(nodes));
    provenance.push_back(std::move(tag));
    return true;
  }

  void merge(const CandidateSet& other) {
    for (std::size_t i = 0; i < other.size(); ++i) add(other.subsets[i], other.provenance[i]);
  }

  std::size_t size() const { return subsets.size(); }
  bool empty() const { return subsets.empty(); }

  std::vector<std::vector<NodeId>> subsets;
  std::vector<std::string> provenance;

 private:
  std::set<std::vector<NodeId>> seen_;
};

struct NodeSubsample {
  std::int64_t graph_id = 0;
  std::vector<NodeId> kept;
  double tree_norm_full = 0.0;
  double tree_norm_sub = 0.0;
  double tmd = 0.0;  // tree_norm_full - tree_norm_sub, the epsilon_i of the node-level bound
  std::string provenance;
};

inline constexpr double kTieTolerance = 1e-9;

/// Index of the best score; scores within kTieTolerance (relative) of the
/// best count as tied and the lexicographically smallest subset wins.
inline std::size_t pick_best(std::span<const double> scores, const std::vector<std::vector<NodeId>>& subsets,
                             bool maximize) {
  if (scores.empty()) throw InputError("no candidates to choose from");
  double best = scores[0];
  for (double s : scores) best = maximize ? std::max(best, s) : std::min(best, s);
  const double slack = kTieTolerance * std::max(1.0, std::abs(best));
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::abs(scores[i] - best) > slack) continue;
    if (!pick || std::lexicographical_compare(subsets[i].begin(), subsets[i].end(), subsets[*pick].begin(),
                                              subsets[*pick].end())) {
      pick = i;
    }
  }
  return *pick;
}

/// One ball per root: the nodes within the deepest BFS radius whose ball
/// still has at most k nodes.
inline CandidateSet k_bfs_candidates(const Graph& g, std::size_t k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  const Adjacency adj = g.adjacency();
  CandidateSet out;
  std::vector<char> seen(g.node_count, 0);
  for (NodeId root = 0; root < g.node_count; ++root) {
    std::fill(seen.begin(), seen.end(), 0);
    std::vector<NodeId> ball{root};
    std::vector<NodeId> frontier{root};
    seen[root] = 1;
    while (!frontier.empty()) {
      std::vector<NodeId> next;
      for (NodeId v : frontier) {
        for (NodeId u : adj.neighbors(v)) {
          if (!seen[u]) {
            seen[u] = 1;
            next.push_back(u);
          }
        }
      }
      if (next.empty() || ball.size() + next.size() > k) break;
      ball.insert(ball.end(), next.begin(), next.end());
      frontier = std::move(next);
    }
    out.add(std::move(ball), "bfs:" + std::to_string(root));
  }
  return out;
}

inline constexpr double kRestartProbability = 0.15;
inline constexpr std::size_t kWalkStepsPerNode = 50;

/// Restarting random walk from the highest-degree node; unvisited nodes in
/// ascending order fill the set if the step budget runs out.
inline std::vector<NodeId> rw_candidate(const Graph& g, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("k must be at least 1");
  const std::size_t n = g.node_count;
  if (n == 0) return {};
  const std::size_t target = std::min(k, n);
  const Adjacency adj = g.adjacency();
  NodeId start = 0;
  for (NodeId v = 1; v < n; ++v) {
    if (adj.degree(v) > adj.degree(start)) start = v;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<char> visited(n, 0);
  std::vector<NodeId> kept{start};
  visited[start] = 1;
  NodeId at = start;
  for (std::size_t step = 0; step < kWalkStepsPerNode * k && kept.size() < target; ++step) {
    const auto nbrs = adj.neighbors(at);
    if (nbrs.empty() || coin(rng) < kRestartProbability) {
      at = start;
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, nbrs.size() - 1);
    at = nbrs[pick(rng)];
    if (!visited[at]) {
      visited[at] = 1;
      kept.push_back(at);
    }
  }
  for (NodeId v = 0; v < n && kept.size() < target; ++v) {
    if (!visited[v]) {
      visited[v] = 1;
      kept.push_back(v);
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

/// Core numbers by repeated removal of a minimum-degree node.
inline std::vector<std::size_t> core_numbers(const Graph& g) {
  const Adjacency adj = g.adjacency();
  const std::size_t n = g.node_count;
  std::vector<std::size_t> deg(n), core(n, 0);
  std::set<std::pair<std::size_t, NodeId>> queue;
  for (NodeId v = 0; v < n; ++v) {
    deg[v] = adj.degree(v);
    queue.emplace(deg[v], v);
  }
  std::vector<char> removed(n, 0);
  std::size_t level = 0;
  while (!queue.empty()) {
    auto [d, v] = *queue.begin();
    queue.erase(queue.begin());
    level = std::max(level, d);
    core[v] = level;
    removed[v] = 1;
    for (NodeId u : adj.neighbors(v)) {
      if (removed[u]) continue;
      queue.erase({deg[u], u});
      --deg[u];
      queue.emplace(deg[u], u);
    }
  }
  return core;
}

/// First min(k, n) nodes ordered by core number desc, degree desc, index asc.
/// Degree counts only neighbors in the node's own core (core number >= its own).
inline std::vector<NodeId> kcore_candidate(const Graph& g, std::size_t k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  const auto core = core_numbers(g);
  const Adjacency adj = g.adjacency();
  std::vector<std::size_t> core_degree(g.node_count, 0);
  for (NodeId v = 0; v < g.node_count; ++v) {
    for (NodeId u : adj.neighbors(v)) core_degree[v] += core[u] >= core[v];
  }
  std::vector<NodeId> order(g.node_count);
  for (NodeId v = 0; v < g.node_count; ++v) order[v] = v;
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    if (core[a] != core[b]) return core[a] > core[b];
    return core_degree[a] > core_degree[b];
  });
  order.resize(std::min(k, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

/// The candidate whose induced subgraph has the largest tree norm, which is
/// the one with the smallest TMD to the full graph.
inline NodeSubsample select_subset(const Graph& g, const CandidateSet& cands, const TmdConfig& cfg) {
  if (cands.empty()) throw InputError("candidate set is empty");
  std::vector<double> norms(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    norms[i] = tree_norm(induced_subgraph(g, cands.subsets[i]), cfg).value;
  }
  const std::size_t best = pick_best(norms, cands.subsets, true);
  NodeSubsample out;
  out.graph_id = g.id;
  out.kept = cands.subsets[best];
  out.tree_norm_full = tree_norm(g, cfg).value;
  out.tree_norm_sub = norms[best];
  out.tmd = out.tree_norm_full - out.tree_norm_sub;
  out.provenance = cands.provenance[best];
  return out;
}

inline constexpr double kBruteForceSelectLimit = 1e5;

/// All k-subsets of the nodes, in lexicographic order.
inline CandidateSet all_k_subsets(std::size_t n, std::size_t k) {
  CandidateSet out;
  if (k > n) return out;
  std::vector<NodeId> comb(k);
  for (std::size_t i = 0; i < k; ++i) comb[i] = i;
  while (true) {
    out.add(comb, "exhaustive");
    std::size_t i = k;
    while (i > 0 && comb[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
  }
  return out;
}

struct BruteForceSelection {
  NodeSubsample best;
  std::optional<bool> reaches_threshold;  // max tree norm >= threshold, when one is given
};

/// Exhaustive optimizer for the tree-norm decision problem.
inline BruteForceSelection brute_force_select(const Graph& g, std::size_t k, const TmdConfig& cfg,
                                              std::optional<double> threshold = {}) {
  if (k < 1 || k > g.node_count) {
    throw ConfigError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(g.node_count) + "]");
  }
  if (binomial(g.node_count, k) > kBruteForceSelectLimit) {
    throw SizeError("brute_force_select: C(n,k) exceeds 10^5");
  }
  BruteForceSelection out;
  out.best = select_subset(g, all_k_subsets(g.node_count, k), cfg);
  if (threshold) out.reaches_threshold = out.best.tree_norm_sub >= *threshold;
  return out;
}

struct Heuristics {
  bool bfs = true;
  bool rw = true;
  bool kcore = true;

  bool any() const { return bfs || rw || kcore; }
};

inline Heuristics parse_heuristics(std::string_view spec) {
  Heuristics h{false, false, false};
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const auto item = spec.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    if (item == "bfs") {
      h.bfs = true;
    } else if (item == "rw") {
      h.rw = true;
    } else if (item == "kcore") {
      h.kcore = true;
    } else if (item == "all") {
      h = Heuristics{};
    } else {
      throw ConfigError("unknown heuristic '" + std::string(item) + "' (expected bfs, rw, kcore or all)");
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return h;
}

inline std::size_t node_budget(std::size_t n, double frac) {
  const auto k = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
  return std::min(n, std::max<std::size_t>(1, k));
}

inline CandidateSet build_candidates(const Graph& g, std::size_t k, const Heuristics& h, std::uint64_t seed) {
  CandidateSet cands;
  if (h.bfs) cands.merge(k_bfs_candidates(g, k));
  if (h.rw) cands.add(rw_candidate(g, k, seed), "rw");
  if (h.kcore) cands.add(kcore_candidate(g, k), "kcore");
  return cands;
}

/// Per graph: budget k = max(1, round(frac * n)), candidate union from the
/// enabled heuristics, then select_subset. Output follows dataset order.
inline std::vector<NodeSubsample> subsample_dataset(const Dataset& ds, double frac, const TmdConfig& cfg,
                                                    const Heuristics& h = {}, std::uint64_t seed = 0) {
  cfg.check();
  if (!(frac > 0.0 && frac <= 1.0)) throw ConfigError("frac must lie in (0, 1]");
  if (!h.any()) throw ConfigError("no candidate heuristic enabled");
  std::vector<NodeSubsample> out(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) {
    const Graph& g = ds[i];
    if (g.node_count == 0) {
      out[i].graph_id = g.id;
      out[i].provenance = "empty";
      return;
    }
    const std::size_t k = node_budget(g.node_count, frac);
    out[i] = select_subset(g, build_candidates(g, k, h, seed + i), cfg);
  });
  return out;
}

inline nlohmann::json node_subsample_to_json(const NodeSubsample& s) {
  return {{"id", s.graph_id},
          {"kept", s.kept},
          {"tree_norm_full", s.tree_norm_full},
          {"tree_norm_sub", s.tree_norm_sub},
          {"tmd", s.tmd},
          {"provenance", s.provenance}};
}

}  // namespace tmdcore
