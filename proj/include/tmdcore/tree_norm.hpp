#pragma once

#include <cmath>
#include <cstddef>
#include <thread>
#include <vector>

#include "tmdcore/config.hpp"
#include "tmdcore/errors.hpp"
#include "tmdcore/graph.hpp"
#include "tmdcore/parallel.hpp"

namespace tmdcore {

struct TreeNormReport {
  double value = 0.0;
  std::vector<double> level_l1;  // ||z^(l)||_1 for l = 0..L-1
};

/// Tree norm in O(|E| L): x_v = ||f^v||, z^(l) = A z^(l-1) by edge-list
/// mat-vec, and the norm is || z^(0) + sum_l (prod_{t<=l} w(L-t)) z^(l) ||_1.
inline TreeNormReport tree_norm(const Graph& g, const TmdConfig& cfg) {
  cfg.check();
  const std::size_t n = g.node_count;
  const std::size_t depth = cfg.depth;

  std::vector<double> z(n), next(n), b(n);
  for (NodeId v = 0; v < n; ++v) z[v] = norm(g.feature(v), cfg.norm);
  b = z;

  TreeNormReport report;
  report.level_l1.reserve(depth);
  double l1 = 0.0;
  for (double x : z) l1 += x;
  report.level_l1.push_back(l1);

  double coefficient = 1.0;
  for (std::size_t level = 1; level < depth; ++level) {
    std::fill(next.begin(), next.end(), 0.0);
    for (const Edge& e : g.edges) {
      next[e.u] += z[e.v];
      next[e.v] += z[e.u];
    }
    z.swap(next);
    coefficient *= cfg.weights(depth - level);
    l1 = 0.0;
    for (NodeId v = 0; v < n; ++v) {
      l1 += z[v];
      b[v] += coefficient * z[v];
    }
    report.level_l1.push_back(l1);
    if (!std::isfinite(l1) || !std::isfinite(coefficient)) {
      throw NumericError("tree norm overflowed at level " + std::to_string(level) + " of graph " +
                         std::to_string(g.id));
    }
  }
  for (double x : b) report.value += std::abs(x);
  if (!std::isfinite(report.value)) {
    throw NumericError("tree norm overflowed for graph " + std::to_string(g.id));
  }
  return report;
}

/// Per-graph tree norms in dataset order.
inline std::vector<double> tree_norm_batch(const Dataset& ds, const TmdConfig& cfg) {
  cfg.check();
  std::vector<double> out(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) { out[i] = tree_norm(ds[i], cfg).value; });
  return out;
}

}  // namespace tmdcore
