#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "tmdcore/errors.hpp"

namespace tmdcore {

// Square matrix of finite non-negative transport costs, row-major.
class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(std::size_t side) : side_(side), costs_(side * side, 0.0) {}

  CostMatrix(std::size_t side, std::vector<double> costs) : side_(side), costs_(std::move(costs)) {
    if (costs_.size() != side_ * side_) throw InputError("cost matrix is not square");
    check();
  }

  CostMatrix(std::initializer_list<std::initializer_list<double>> rows) : side_(rows.size()) {
    for (const auto& row : rows) {
      if (row.size() != side_) throw InputError("cost matrix is not square");
      costs_.insert(costs_.end(), row.begin(), row.end());
    }
    check();
  }

  std::size_t side() const { return side_; }
  double operator()(std::size_t i, std::size_t j) const { return costs_[i * side_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return costs_[i * side_ + j]; }

  void check() const {
    for (double c : costs_) {
      if (!std::isfinite(c)) throw InputError("cost matrix entry is not finite");
      if (c < 0.0) throw InputError("cost matrix entry is negative");
    }
  }

 private:
  std::size_t side_ = 0;
  std::vector<double> costs_;
};

struct MatchingResult {
  double total_cost = 0.0;
  std::vector<std::size_t> assignment;  // row i -> column assignment[i]
};

namespace detail {

inline double assignment_cost(const CostMatrix& c, const std::vector<std::size_t>& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) total += c(i, assignment[i]);
  return total;
}

// Among perfect matchings of the bipartite graph `tight` (tight[i*q+j]),
// move `match` to the lexicographically smallest one. Rows are fixed in
// ascending order; a smaller column is accepted for row i when an alternating
// path over unfixed rows hands row i's current column to someone else.
inline void lexicographic_refine(std::size_t q, const std::vector<char>& tight,
                                 std::vector<std::size_t>& match) {
  std::vector<std::size_t> owner(q);
  for (std::size_t i = 0; i < q; ++i) owner[match[i]] = i;
  std::vector<std::size_t> pred(q);
  std::vector<char> row_seen(q);
  std::vector<std::size_t> queue;
  for (std::size_t i = 0; i < q; ++i) {
    const std::size_t target = match[i];
    for (std::size_t j = 0; j < target; ++j) {
      if (!tight[i * q + j]) continue;
      const std::size_t start = owner[j];
      if (start < i) continue;  // held by a fixed row
      std::fill(row_seen.begin(), row_seen.end(), 0);
      row_seen[start] = 1;
      queue.assign(1, start);
      std::size_t end_row = q;
      for (std::size_t head = 0; head < queue.size() && end_row == q; ++head) {
        const std::size_t r = queue[head];
        for (std::size_t c = 0; c < q; ++c) {
          if (!tight[r * q + c] || c == j) continue;
          if (c == target) {
            end_row = r;
            break;
          }
          const std::size_t next = owner[c];
          if (next <= i || row_seen[next]) continue;
          row_seen[next] = 1;
          pred[next] = r;
          queue.push_back(next);
        }
      }
      if (end_row == q) continue;
      std::size_t give = target;
      std::size_t row = end_row;
      while (true) {
        const std::size_t old = match[row];
        match[row] = give;
        owner[give] = row;
        if (row == start) break;
        give = old;
        row = pred[row];
      }
      match[i] = j;
      owner[j] = i;
      break;
    }
  }
}

}  // namespace detail

/// Exact minimum-cost perfect matching (shortest augmenting path with
/// potentials, O(q^3)). Among optimal permutations the lexicographically
/// smallest assignment is returned; total_cost is the sum of the matched
/// entries in row order.
inline MatchingResult min_cost_matching(const CostMatrix& c) {
  c.check();
  const std::size_t q = c.side();
  MatchingResult result;
  if (q == 0) return result;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual source.
  std::vector<double> u(q + 1, 0.0), v(q + 1, 0.0);
  std::vector<std::size_t> p(q + 1, 0), way(q + 1, 0);
  for (std::size_t i = 1; i <= q; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(q + 1, kInf);
    std::vector<char> used(q + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= q; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= q; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> match(q);
  double scale = 0.0;
  for (std::size_t j = 1; j <= q; ++j) match[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < q; ++j) scale = std::max(scale, c(i, j));
  }

  // Edges with zero reduced cost carry every optimal permutation.
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(q) *
                     std::max(scale, 1.0);
  std::vector<char> tight(q * q, 0);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      tight[i * q + j] = std::abs(c(i, j) - u[i + 1] - v[j + 1]) <= tol;
    }
    tight[i * q + match[i]] = 1;
  }
  detail::lexicographic_refine(q, tight, match);

  result.assignment = std::move(match);
  result.total_cost = detail::assignment_cost(c, result.assignment);
  return result;
}

/// Exhaustive oracle over all q! permutations in lexicographic order; the first
/// permutation reaching the minimum wins. Limited to q <= 9.
inline MatchingResult brute_force_matching(const CostMatrix& c) {
  const std::size_t q = c.side();
  if (q > 9) throw SizeError("brute-force matching supports at most 9x9, got " + std::to_string(q));
  c.check();
  std::vector<std::size_t> perm(q);
  std::iota(perm.begin(), perm.end(), 0);
  MatchingResult best;
  best.total_cost = std::numeric_limits<double>::infinity();
  do {
    const double cost = detail::assignment_cost(c, perm);
    if (cost < best.total_cost) {
      best.total_cost = cost;
      best.assignment = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (q == 0) best.total_cost = 0.0;
  return best;
}

}  // namespace tmdcore
