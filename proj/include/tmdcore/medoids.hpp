#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tmdcore/distance_matrix.hpp"
#include "tmdcore/errors.hpp"
#include "tmdcore/graph.hpp"

namespace tmdcore {

struct Selection {
  std::vector<std::size_t> indices;  // ascending
  std::vector<std::size_t> tau;      // aligned with indices
  std::optional<double> objective;   // absent for random selection without a matrix
  std::string method;
  std::uint64_t seed = 0;
};

namespace detail {

inline void check_index_set(const DistanceMatrix& d, std::span<const std::size_t> idx) {
  if (idx.empty()) throw InputError("medoid index set is empty");
  for (std::size_t j : idx) {
    if (j >= d.n) throw InputError("medoid index " + std::to_string(j) + " out of range");
  }
}

inline void check_k(std::size_t n, std::size_t k) {
  if (k < 1 || k > n) {
    throw ConfigError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
}

}  // namespace detail

/// f_D(I) = (1/n) sum_i min_{j in I} D(i, j).
inline double medoids_objective(const DistanceMatrix& d, std::span<const std::size_t> idx) {
  detail::check_index_set(d, idx);
  double sum = 0.0;
  for (std::size_t i = 0; i < d.n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j : idx) best = std::min(best, d(i, j));
    sum += best;
  }
  return sum / static_cast<double>(d.n);
}

namespace detail {

// A medoid owns itself; otherwise ties go to the smaller medoid index.
inline std::vector<std::size_t> assign_nearest(const DistanceMatrix& d, std::span<const std::size_t> idx) {
  check_index_set(d, idx);
  std::vector<std::size_t> kappa(d.n, 0);
  for (std::size_t i = 0; i < d.n; ++i) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < idx.size(); ++a) {
      if (idx[best] == i) break;
      const double da = d(i, idx[a]);
      const double db = d(i, idx[best]);
      if (idx[a] == i || da < db || (da == db && idx[a] < idx[best])) best = a;
    }
    kappa[i] = best;
  }
  return kappa;
}

}  // namespace detail

/// Nearest-medoid counts aligned with idx.
inline std::vector<std::size_t> cluster_sizes(const DistanceMatrix& d, std::span<const std::size_t> idx) {
  std::vector<std::size_t> tau(idx.size(), 0);
  for (std::size_t a : detail::assign_nearest(d, idx)) ++tau[a];
  return tau;
}

/// Index of the nearest medoid (into idx) for every dataset element.
inline std::vector<std::size_t> nearest_medoid(const DistanceMatrix& d, std::span<const std::size_t> idx) {
  return detail::assign_nearest(d, idx);
}

inline Selection make_selection(const DistanceMatrix& d, std::vector<std::size_t> idx, std::string method,
                                std::uint64_t seed) {
  std::sort(idx.begin(), idx.end());
  Selection s;
  s.tau = cluster_sizes(d, idx);
  s.objective = medoids_objective(d, idx);
  s.indices = std::move(idx);
  s.method = std::move(method);
  s.seed = seed;
  return s;
}

/// PAM: greedy BUILD, then SWAP with the best strictly improving exchange per
/// iteration. Every accepted objective is appended to `trace` when given.
inline Selection kmedoids(const DistanceMatrix& d, std::size_t k, std::uint64_t seed = 0,
                          std::size_t max_iter = 100, std::vector<double>* trace = nullptr) {
  detail::check_k(d.n, k);
  const std::size_t n = d.n;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> medoids;
  std::vector<char> chosen(n, 0);
  std::vector<double> nearest(n, inf);
  while (medoids.size() < k) {
    std::size_t best = n;
    double best_sum = inf;
    for (std::size_t h = 0; h < n; ++h) {
      if (chosen[h]) continue;
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += std::min(nearest[i], d(i, h));
      if (sum < best_sum) {
        best_sum = sum;
        best = h;
      }
    }
    chosen[best] = 1;
    medoids.push_back(best);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], d(i, best));
  }

  double current = medoids_objective(d, medoids);
  if (trace) trace->push_back(current);

  for (std::size_t iter = 0; iter < max_iter && k < n; ++iter) {
    // Nearest and second-nearest medoid distances per element.
    std::vector<double> d1(n, inf), d2(n, inf);
    std::vector<std::size_t> owner(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < k; ++a) {
        const double x = d(i, medoids[a]);
        if (x < d1[i]) {
          d2[i] = d1[i];
          d1[i] = x;
          owner[i] = a;
        } else if (x < d2[i]) {
          d2[i] = x;
        }
      }
    }
    double best_obj = current;
    std::size_t best_out = k, best_in = n;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t h = 0; h < n; ++h) {
        if (chosen[h]) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double rest = owner[i] == a ? d2[i] : d1[i];
          sum += std::min(rest, d(i, h));
        }
        const double obj = sum / static_cast<double>(n);
        if (obj < best_obj - 1e-12 * std::max(1.0, std::abs(best_obj))) {
          best_obj = obj;
          best_out = a;
          best_in = h;
        }
      }
    }
    if (best_in == n) break;
    chosen[medoids[best_out]] = 0;
    chosen[best_in] = 1;
    medoids[best_out] = best_in;
    current = medoids_objective(d, medoids);
    if (trace) trace->push_back(current);
  }
  return make_selection(d, std::move(medoids), "kmedoids", seed);
}

inline constexpr double kBruteForceMedoidLimit = 1e6;

inline double binomial(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

/// Exhaustive optimum; the lexicographically smallest optimal set wins.
inline Selection brute_force_medoids(const DistanceMatrix& d, std::size_t k) {
  detail::check_k(d.n, k);
  if (binomial(d.n, k) > kBruteForceMedoidLimit) {
    throw SizeError("brute_force_medoids: C(n,k) exceeds 10^6");
  }
  std::vector<std::size_t> comb(k), best;
  std::iota(comb.begin(), comb.end(), 0);
  double best_obj = std::numeric_limits<double>::infinity();
  while (true) {
    const double obj = medoids_objective(d, comb);
    if (obj < best_obj) {
      best_obj = obj;
      best = comb;
    }
    std::size_t i = k;
    while (i > 0 && comb[i - 1] == d.n - k + i - 1) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
  }
  return make_selection(d, std::move(best), "brute_force", 0);
}

/// Euclidean distance between per-graph mean feature rows.
inline DistanceMatrix feature_distance_matrix(const Dataset& ds) {
  const std::size_t p = ds.feature_dim;
  std::vector<std::vector<double>> means;
  for (const Graph& g : ds.graphs) {
    std::vector<double> m(p, 0.0);
    for (NodeId v = 0; v < g.node_count; ++v) {
      const auto row = g.feature(v);
      for (std::size_t c = 0; c < p; ++c) m[c] += row[c];
    }
    if (g.node_count > 0) {
      for (double& x : m) x /= static_cast<double>(g.node_count);
    }
    means.push_back(std::move(m));
  }
  DistanceMatrix dm;
  dm.n = ds.size();
  dm.metric = "feature:l2";
  for (std::size_t i = 0; i < dm.n; ++i) {
    for (std::size_t j = i + 1; j < dm.n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < p; ++c) {
        const double diff = means[i][c] - means[j][c];
        acc += diff * diff;
      }
      dm.values.push_back(std::sqrt(acc));
    }
  }
  return dm;
}

/// Structural WL subtree features: every node starts with the same label, so
/// node features never enter. Label dictionaries are shared across the
/// dataset; histograms for iterations 0..iters are concatenated.
inline std::vector<std::map<std::int64_t, std::int64_t>> wl_histograms(const Dataset& ds, std::size_t iters) {
  std::vector<std::map<std::int64_t, std::int64_t>> hist(ds.size());
  std::vector<std::vector<std::int64_t>> labels(ds.size());
  std::vector<Adjacency> adj;
  adj.reserve(ds.size());
  for (std::size_t g = 0; g < ds.size(); ++g) {
    labels[g].assign(ds[g].node_count, 0);
    adj.push_back(ds[g].adjacency());
  }
  std::int64_t offset = 0;
  std::int64_t alphabet = 1;
  for (std::size_t h = 0;; ++h) {
    for (std::size_t g = 0; g < ds.size(); ++g) {
      for (std::int64_t l : labels[g]) ++hist[g][offset + l];
    }
    if (h == iters) break;
    offset += alphabet;
    std::map<std::vector<std::int64_t>, std::int64_t> dictionary;
    for (std::size_t g = 0; g < ds.size(); ++g) {
      std::vector<std::int64_t> next(labels[g].size());
      for (NodeId v = 0; v < labels[g].size(); ++v) {
        std::vector<std::int64_t> signature{labels[g][v]};
        for (NodeId u : adj[g].neighbors(v)) signature.push_back(labels[g][u]);
        std::sort(signature.begin() + 1, signature.end());
        auto [it, fresh] = dictionary.try_emplace(std::move(signature), static_cast<std::int64_t>(dictionary.size()));
        next[v] = it->second;
      }
      labels[g] = std::move(next);
    }
    alphabet = static_cast<std::int64_t>(dictionary.size());
  }
  return hist;
}

namespace detail {

inline std::int64_t sparse_dot(const std::map<std::int64_t, std::int64_t>& a,
                               const std::map<std::int64_t, std::int64_t>& b) {
  std::int64_t acc = 0;
  auto x = a.begin();
  auto y = b.begin();
  while (x != a.end() && y != b.end()) {
    if (x->first < y->first) {
      ++x;
    } else if (y->first < x->first) {
      ++y;
    } else {
      acc += x->second * y->second;
      ++x;
      ++y;
    }
  }
  return acc;
}

}  // namespace detail

/// D(G, G') = sqrt(k(G,G) + k(G',G') - 2 k(G,G')) for the WL subtree kernel.
inline DistanceMatrix wl_pseudometric_matrix(const Dataset& ds, std::size_t iters) {
  const auto hist = wl_histograms(ds, iters);
  std::vector<std::int64_t> self(ds.size());
  for (std::size_t g = 0; g < ds.size(); ++g) self[g] = detail::sparse_dot(hist[g], hist[g]);
  DistanceMatrix dm;
  dm.n = ds.size();
  dm.metric = "wl";
  dm.depth = static_cast<std::uint32_t>(iters);
  for (std::size_t i = 0; i < dm.n; ++i) {
    for (std::size_t j = i + 1; j < dm.n; ++j) {
      double radicand = static_cast<double>(self[i] + self[j] - 2 * detail::sparse_dot(hist[i], hist[j]));
      if (radicand < -1e-9) throw NumericError("WL kernel radicand is negative");
      dm.values.push_back(std::sqrt(std::max(0.0, radicand)));
    }
  }
  return dm;
}

/// k distinct uniform indices. With a distance matrix, tau and the objective
/// come from it; otherwise tau is n/k with the remainder on the first medoids.
inline Selection random_selection(std::size_t n, std::size_t k, std::uint64_t seed,
                                  const DistanceMatrix* d = nullptr) {
  detail::check_k(n, k);
  if (d && d->n != n) throw InputError("distance matrix size does not match n");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  std::vector<std::size_t> idx = std::move(all);
  if (d) return make_selection(*d, std::move(idx), "random", seed);
  std::sort(idx.begin(), idx.end());
  Selection s;
  s.indices = std::move(idx);
  s.tau.assign(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++s.tau[i];
  s.method = "random";
  s.seed = seed;
  return s;
}

inline nlohmann::json selection_to_json(const Selection& s) {
  nlohmann::json j;
  j["method"] = s.method;
  j["k"] = s.indices.size();
  j["seed"] = s.seed;
  j["indices"] = s.indices;
  j["tau"] = s.tau;
  j["objective"] = s.objective ? nlohmann::json(*s.objective) : nlohmann::json(nullptr);
  return j;
}

inline Selection selection_from_json(const nlohmann::json& j) {
  Selection s;
  s.method = j.at("method").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.indices = j.at("indices").get<std::vector<std::size_t>>();
  s.tau = j.at("tau").get<std::vector<std::size_t>>();
  if (!j.at("objective").is_null()) s.objective = j.at("objective").get<double>();
  return s;
}

}  // namespace tmdcore
