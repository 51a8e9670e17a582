#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tmdcore/config.hpp"
#include "tmdcore/distance_matrix.hpp"
#include "tmdcore/errors.hpp"
#include "tmdcore/graph.hpp"
#include "tmdcore/medoids.hpp"
#include "tmdcore/node_subsample.hpp"
#include "tmdcore/parallel.hpp"
#include "tmdcore/tmd.hpp"

namespace tmdcore {

enum class Activation { relu, identity };

struct GinLayer {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::vector<double> weight;  // d_in x d_out, row-major; rows act on the input
  std::vector<double> bias;
  Activation activation = Activation::relu;

  double w(std::size_t i, std::size_t o) const { return weight[i * d_out + o]; }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(bias);
    for (std::size_t i = 0; i < d_in; ++i) {
      if (x[i] == 0.0) continue;
      for (std::size_t o = 0; o < d_out; ++o) y[o] += x[i] * w(i, o);
    }
    if (activation == Activation::relu) {
      for (double& v : y) v = std::max(0.0, v);
    }
    return y;
  }

  bool operator==(const GinLayer&) const = default;
};

// Message-passing layers followed by one readout layer (the last entry).
struct GinModel {
  double eta = 1.0;
  std::vector<GinLayer> layers;

  std::size_t message_passing_layers() const { return layers.empty() ? 0 : layers.size() - 1; }
  // TMD depth matched to this model.
  std::size_t depth() const { return layers.size(); }
  const GinLayer& readout() const { return layers.back(); }

  bool operator==(const GinModel&) const = default;

  void check() const {
    if (layers.empty()) throw ConfigError("GIN needs at least a readout layer");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("GIN eta must be finite and positive");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const GinLayer& layer = layers[l];
      if (layer.weight.size() != layer.d_in * layer.d_out || layer.bias.size() != layer.d_out) {
        throw ConfigError("GIN layer " + std::to_string(l) + " has inconsistent shapes");
      }
      if (l > 0 && layer.d_in != layers[l - 1].d_out) {
        throw ConfigError("GIN layer " + std::to_string(l) + " input does not chain");
      }
    }
  }
};

/// z_v <- act((z_v + eta * sum_{u in N(v)} z_u) W + b) per message-passing
/// layer, then h(G) = act((sum_v z_v) W_r + b_r). Sums run in ascending index.
inline std::vector<double> gin_forward(const GinModel& m, const Graph& g) {
  m.check();
  const std::size_t n = g.node_count;
  if (n > 0 && g.feature_dim != m.layers.front().d_in) {
    throw InputError("graph feature dimension " + std::to_string(g.feature_dim) + " does not match GIN input " +
                     std::to_string(m.layers.front().d_in));
  }
  const Adjacency adj = g.adjacency();
  std::vector<std::vector<double>> z(n);
  for (NodeId v = 0; v < n; ++v) z[v].assign(g.feature(v).begin(), g.feature(v).end());
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    const GinLayer& layer = m.layers[l];
    std::vector<std::vector<double>> next(n);
    for (NodeId v = 0; v < n; ++v) {
      std::vector<double> agg(layer.d_in, 0.0);
      for (NodeId u : adj.neighbors(v)) {
        for (std::size_t c = 0; c < layer.d_in; ++c) agg[c] += z[u][c];
      }
      for (std::size_t c = 0; c < layer.d_in; ++c) agg[c] = z[v][c] + m.eta * agg[c];
      next[v] = layer.apply(agg);
    }
    z = std::move(next);
  }
  const GinLayer& out = m.readout();
  std::vector<double> pooled(out.d_in, 0.0);
  for (NodeId v = 0; v < n; ++v) {
    for (std::size_t c = 0; c < out.d_in; ++c) pooled[c] += z[v][c];
  }
  return out.apply(pooled);
}

struct LipschitzProfile {
  std::vector<double> phi;
  double product = 1.0;
  bool converged = true;
};

struct SpectralEstimate {
  double value = 0.0;
  bool converged = true;
};

inline constexpr std::size_t kPowerIterations = 200;
inline constexpr double kPowerTolerance = 1e-10;

/// Largest singular value of a row-major rows x cols matrix by power
/// iteration on W^T W from a fixed pseudo-random start.
inline SpectralEstimate spectral_norm(std::span<const double> a, std::size_t rows, std::size_t cols) {
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(cols), u(rows);
  for (double& x : v) x = gauss(rng);
  auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += e * e;
    s = std::sqrt(s);
    if (s > 0.0) {
      for (double& e : x) e /= s;
    }
    return s;
  };
  normalize(v);
  SpectralEstimate est;
  est.converged = false;
  double previous = 0.0;
  for (std::size_t it = 0; it < kPowerIterations; ++it) {
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) u[r] += a[r * cols + c] * v[c];
    }
    const double sigma = normalize(u);
    est.value = sigma;
    if (sigma == 0.0) {
      est.converged = true;
      break;
    }
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) v[c] += a[r * cols + c] * u[r];
    }
    normalize(v);
    if (it > 0 && std::abs(sigma - previous) <= kPowerTolerance * sigma) {
      est.converged = true;
      break;
    }
    previous = sigma;
  }
  return est;
}

/// Phi_l = spectral norm of each layer's weight (relu and identity are
/// 1-Lipschitz); the readout layer is included in the product.
inline LipschitzProfile layer_lipschitz(const GinModel& m) {
  LipschitzProfile p;
  for (const GinLayer& layer : m.layers) {
    const auto est = spectral_norm(layer.weight, layer.d_in, layer.d_out);
    p.phi.push_back(est.value);
    p.product *= est.value;
    p.converged = p.converged && est.converged;
  }
  return p;
}

/// Seeded Gaussian layers rescaled to unit spectral norm, zero biases, relu on
/// message passing and a scalar identity readout. depth counts all layers.
inline GinModel random_gin(std::uint64_t seed, std::size_t feature_dim, std::size_t hidden, std::size_t depth,
                           double eta) {
  if (feature_dim < 1 || hidden < 1 || depth < 1) throw ConfigError("random_gin dimensions must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  GinModel m;
  m.eta = eta;
  std::size_t d_in = feature_dim;
  for (std::size_t l = 0; l < depth; ++l) {
    const bool last = l + 1 == depth;
    GinLayer layer;
    layer.d_in = d_in;
    layer.d_out = last ? 1 : hidden;
    layer.weight.resize(layer.d_in * layer.d_out);
    for (double& x : layer.weight) x = gauss(rng);
    const double phi = spectral_norm(layer.weight, layer.d_in, layer.d_out).value;
    if (phi > 0.0) {
      for (double& x : layer.weight) x /= phi;
    }
    layer.bias.assign(layer.d_out, 0.0);
    layer.activation = last ? Activation::identity : Activation::relu;
    d_in = layer.d_out;
    m.layers.push_back(std::move(layer));
  }
  m.check();
  return m;
}

/// Every layer is the identity map on R^dim with identity activation.
inline GinModel identity_gin(std::size_t dim, std::size_t depth, double eta = 1.0) {
  GinModel m;
  m.eta = eta;
  for (std::size_t l = 0; l < depth; ++l) {
    GinLayer layer;
    layer.d_in = layer.d_out = dim;
    layer.weight.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) layer.weight[i * dim + i] = 1.0;
    layer.bias.assign(dim, 0.0);
    layer.activation = Activation::identity;
    m.layers.push_back(std::move(layer));
  }
  m.check();
  return m;
}

inline double l2_distance(std::span<const double> a, std::span<const double> b) {
  return distance(a, b, FeatureNorm::l2);
}

struct StabilityReport {
  std::vector<double> ratios;  // +inf marks a positive gap at zero TMD
  double max_ratio = 0.0;
  std::size_t violations = 0;  // ratios above 1
  std::size_t infinite = 0;
  std::string preset;
  double lipschitz_product = 1.0;
};

inline constexpr double kRatioSlack = 1e-9;

/// ratio = ||h(a) - h(b)|| / (tmd(a, b) * prod Phi); 0/0 counts as 0.
inline StabilityReport stability_report(const GinModel& m, const std::vector<std::pair<Graph, Graph>>& pairs,
                                        const TmdConfig& cfg) {
  m.check();
  cfg.check();
  if (cfg.depth != m.depth()) {
    throw ConfigError("TMD depth " + std::to_string(cfg.depth) + " must equal message-passing layers + 1 = " +
                      std::to_string(m.depth()));
  }
  const auto profile = layer_lipschitz(m);
  StabilityReport r;
  r.preset = cfg.weights.preset();
  r.lipschitz_product = profile.product;
  r.ratios.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto& [a, b] = pairs[i];
    const double num = l2_distance(gin_forward(m, a), gin_forward(m, b));
    const double den = tmd(a, b, cfg) * profile.product;
    if (den == 0.0) {
      r.ratios[i] = num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      r.ratios[i] = num / den;
    }
  });
  for (double x : r.ratios) {
    r.max_ratio = std::max(r.max_ratio, x);
    if (std::isinf(x)) ++r.infinite;
    if (x > 1.0 + kRatioSlack) ++r.violations;
  }
  return r;
}

inline nlohmann::json stability_to_json(const StabilityReport& r) {
  return {{"max_ratio", std::isinf(r.max_ratio) ? nlohmann::json("inf") : nlohmann::json(r.max_ratio)},
          {"violations", r.violations},
          {"pairs", r.ratios.size()},
          {"preset", r.preset},
          {"infinite", r.infinite},
          {"lipschitz_product", r.lipschitz_product}};
}

inline constexpr double kLossClip = 10.0;

/// Absolute error clipped to [0, 10]; 1-Lipschitz in the prediction.
inline double abs_clipped_loss(double prediction, double target) {
  return std::min(std::abs(prediction - target), kLossClip);
}

struct ChainCheck {
  std::size_t checked = 0;
  std::size_t holds = 0;     // gap <= (M/n) sum ||h(G_kappa(i)) - h(G_i)|| + 1e-9
  double worst_slack = 0.0;  // max over hypotheses of gap - rhs
};

struct ErmReport {
  std::string mode;
  std::size_t erm_index = 0;
  double loss_full_of_erm = 0.0;
  double min_loss_full = 0.0;
  double bound_rhs = 0.0;
  double epsilon = 0.0;
  double M = 1.0;
  double c = 0.0;
  bool satisfied = false;
  ChainCheck chain;             // loss of the prediction alone (target fixed at 0)
  ChainCheck chain_labeled;     // labeled loss, unmodified right-hand side
  ChainCheck chain_label_aware; // labeled loss, rhs adds (M/n) sum |y_kappa(i) - y_i|

  bool chain_ok() const {
    return chain.holds == chain.checked && chain_label_aware.holds == chain_label_aware.checked;
  }
};

inline constexpr double kBoundSlack = 1e-9;

namespace detail {

inline void record_chain(ChainCheck& c, double gap, double rhs) {
  ++c.checked;
  const double slack = gap - rhs;
  if (c.checked == 1 || slack > c.worst_slack) c.worst_slack = slack;
  if (gap <= rhs + kBoundSlack) ++c.holds;
}

inline void check_erm_inputs(const Dataset& ds, std::span<const double> labels, const std::vector<GinModel>& hs) {
  if (hs.empty()) throw ConfigError("hypothesis set is empty");
  if (labels.size() != ds.size()) {
    throw InputError("label count " + std::to_string(labels.size()) + " does not match dataset size " +
                     std::to_string(ds.size()));
  }
  if (ds.empty()) throw InputError("ERM check needs a non-empty dataset");
  for (const GinModel& h : hs) {
    if (h.readout().d_out != 1) throw ConfigError("ERM hypotheses need a scalar readout");
  }
}

inline double max_lipschitz_product(const std::vector<GinModel>& hs) {
  double c = 0.0;
  for (const GinModel& h : hs) c = std::max(c, layer_lipschitz(h).product);
  return c;
}

inline void finish_report(ErmReport& r, const std::vector<double>& train, const std::vector<double>& full) {
  r.erm_index = static_cast<std::size_t>(std::min_element(train.begin(), train.end()) - train.begin());
  r.loss_full_of_erm = full[r.erm_index];
  r.min_loss_full = *std::min_element(full.begin(), full.end());
  r.bound_rhs = 2.0 * r.c * r.epsilon;
  r.satisfied = r.loss_full_of_erm <= r.min_loss_full + r.bound_rhs + kBoundSlack;
}

}  // namespace detail

/// Graph mode: the ERM hypothesis minimizes the tau-weighted loss on the
/// medoids; epsilon is the medoids objective under d.
inline ErmReport finite_erm_check(const Dataset& ds, std::span<const double> labels,
                                  const std::vector<GinModel>& hypotheses, const Selection& sel,
                                  const DistanceMatrix& d) {
  detail::check_erm_inputs(ds, labels, hypotheses);
  if (d.n != ds.size()) throw InputError("distance matrix does not match dataset");
  if (sel.indices.size() != sel.tau.size() || sel.indices.empty()) throw InputError("malformed selection");
  const std::size_t n = ds.size();
  const auto kappa = nearest_medoid(d, sel.indices);
  const auto tau = cluster_sizes(d, sel.indices);

  ErmReport r;
  r.mode = "graphs";
  r.epsilon = medoids_objective(d, sel.indices);
  r.c = r.M * detail::max_lipschitz_product(hypotheses);

  std::vector<double> train(hypotheses.size()), full(hypotheses.size());
  for (std::size_t hi = 0; hi < hypotheses.size(); ++hi) {
    std::vector<double> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = gin_forward(hypotheses[hi], ds[i])[0]; });
    double weighted = 0.0, weighted0 = 0.0;
    for (std::size_t a = 0; a < sel.indices.size(); ++a) {
      const std::size_t j = sel.indices[a];
      weighted += static_cast<double>(tau[a]) * abs_clipped_loss(out[j], labels[j]);
      weighted0 += static_cast<double>(tau[a]) * abs_clipped_loss(out[j], 0.0);
    }
    double total = 0.0, total0 = 0.0, move = 0.0, label_move = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t m = sel.indices[kappa[i]];
      total += abs_clipped_loss(out[i], labels[i]);
      total0 += abs_clipped_loss(out[i], 0.0);
      move += std::abs(out[m] - out[i]);
      label_move += std::abs(labels[m] - labels[i]);
    }
    const double inv = 1.0 / static_cast<double>(n);
    train[hi] = weighted * inv;
    full[hi] = total * inv;
    detail::record_chain(r.chain, std::abs(weighted0 - total0) * inv, r.M * move * inv);
    detail::record_chain(r.chain_labeled, std::abs(weighted - total) * inv, r.M * move * inv);
    detail::record_chain(r.chain_label_aware, std::abs(weighted - total) * inv, r.M * (move + label_move) * inv);
  }
  detail::finish_report(r, train, full);
  return r;
}

/// Node mode: the ERM hypothesis minimizes the plain loss on the induced
/// subgraphs; epsilon is the mean per-graph TMD to the full graph.
inline ErmReport finite_erm_check(const Dataset& ds, std::span<const double> labels,
                                  const std::vector<GinModel>& hypotheses, const std::vector<NodeSubsample>& subs) {
  detail::check_erm_inputs(ds, labels, hypotheses);
  if (subs.size() != ds.size()) throw InputError("node subsamples do not match dataset");
  const std::size_t n = ds.size();
  std::vector<Graph> reduced(n);
  double eps = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    reduced[i] = induced_subgraph(ds[i], subs[i].kept);
    eps += subs[i].tmd;
  }

  ErmReport r;
  r.mode = "nodes";
  r.epsilon = eps / static_cast<double>(n);
  r.c = r.M * detail::max_lipschitz_product(hypotheses);

  std::vector<double> train(hypotheses.size()), full(hypotheses.size());
  for (std::size_t hi = 0; hi < hypotheses.size(); ++hi) {
    std::vector<double> out(n), out_sub(n);
    parallel_for(n, [&](std::size_t i) {
      out[i] = gin_forward(hypotheses[hi], ds[i])[0];
      out_sub[i] = gin_forward(hypotheses[hi], reduced[i])[0];
    });
    double sub = 0.0, total = 0.0, sub0 = 0.0, total0 = 0.0, move = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sub += abs_clipped_loss(out_sub[i], labels[i]);
      total += abs_clipped_loss(out[i], labels[i]);
      sub0 += abs_clipped_loss(out_sub[i], 0.0);
      total0 += abs_clipped_loss(out[i], 0.0);
      move += std::abs(out_sub[i] - out[i]);
    }
    const double inv = 1.0 / static_cast<double>(n);
    train[hi] = sub * inv;
    full[hi] = total * inv;
    detail::record_chain(r.chain, std::abs(sub0 - total0) * inv, r.M * move * inv);
    detail::record_chain(r.chain_labeled, std::abs(sub - total) * inv, r.M * move * inv);
    detail::record_chain(r.chain_label_aware, std::abs(sub - total) * inv, r.M * move * inv);
  }
  detail::finish_report(r, train, full);
  return r;
}

inline nlohmann::json chain_to_json(const ChainCheck& c) {
  return {{"checked", c.checked}, {"holds", c.holds}, {"worst_slack", c.worst_slack}};
}

inline nlohmann::json erm_to_json(const ErmReport& r) {
  return {{"mode", r.mode},
          {"erm_index", r.erm_index},
          {"loss_full_of_erm", r.loss_full_of_erm},
          {"min_loss_full", r.min_loss_full},
          {"bound_rhs", r.bound_rhs},
          {"epsilon", r.epsilon},
          {"M", r.M},
          {"c", r.c},
          {"satisfied", r.satisfied},
          {"chain", chain_to_json(r.chain)},
          {"chain_labeled", chain_to_json(r.chain_labeled)},
          {"chain_label_aware", chain_to_json(r.chain_label_aware)}};
}

/// Random attributed graphs for self-contained verification runs: 4-10
/// nodes, edge probability 0.35, features uniform in [0, 1]^dim, and label
/// round(10 * edge density).
inline Dataset synthetic_dataset(std::size_t count, std::uint64_t seed, std::size_t dim = 2) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(4, 10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Graph> graphs;
  for (std::size_t gi = 0; gi < count; ++gi) {
    const std::size_t n = size(rng);
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v = u + 1; v < n; ++v) {
        if (unit(rng) < 0.35) edges.emplace_back(u, v);
      }
    }
    std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
    for (auto& row : rows) {
      for (double& x : row) x = unit(rng);
    }
    const double density = 2.0 * static_cast<double>(edges.size()) / static_cast<double>(n * (n - 1));
    Graph g = make_graph(n, edges, rows, static_cast<std::int64_t>(std::lround(density * 10.0)));
    g.id = static_cast<std::int64_t>(gi);
    graphs.push_back(std::move(g));
  }
  return make_dataset("synthetic", std::move(graphs));
}

/// Labels as reals; graphs without a label map to 0.
inline std::vector<double> dataset_labels(const Dataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const Graph& g : ds.graphs) out.push_back(g.label ? static_cast<double>(*g.label) : 0.0);
  return out;
}

/// The pair of graphs with identical structure and features i versus 10 i.
inline std::pair<Graph, Graph> feature_scaled_pair(std::size_t n = 4) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
  std::vector<std::vector<double>> f(n), f10(n);
  for (NodeId v = 0; v < n; ++v) {
    f[v] = {static_cast<double>(v + 1)};
    f10[v] = {10.0 * static_cast<double>(v + 1)};
  }
  return {make_graph(n, edges, f), make_graph(n, edges, f10)};
}

}  // namespace tmdcore
