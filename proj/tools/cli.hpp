#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tmdcore/tmdcore.hpp"

namespace tmdcore::cli {

enum ExitCode : int {
  kOk = 0,
  kConfig = 1,
  kIo = 2,
  kCacheMismatch = 3,
  kPresetCaveat = 4,
  kAssertion = 5,
};

struct Options {
  std::string dataset;
  std::string format = "jsonl";
  std::string tu_name;
  std::size_t depth = 3;
  std::string weights = "const:1";
  std::string norm = "l2";
  std::uint64_t seed = 0;
  std::string out;
  std::string cache;
  bool json = false;
  bool timing = false;

  std::size_t k = 0;
  std::string method = "tmd";
  std::size_t max_iter = 100;
  std::size_t wl_iters = 3;
  double frac = 1.0;
  std::string heuristics = "all";

  std::string mode;
  std::vector<std::uint64_t> synthetic;
  std::size_t pairs = 100;
  std::size_t hypotheses = 20;
  std::size_t hidden = 8;
  double eta = 1.0;
  bool sweep = false;
  bool weights_given = false;
};

inline const std::vector<double> kSweep = {0.5, 1.0, 2.0, 4.0};

class Context {
 public:
  Context(Options opts, std::ostream& out, std::ostream& err) : opts_(std::move(opts)), out_(out), err_(err) {}

  const Options& opts() const { return opts_; }
  std::ostream& err() { return err_; }

  TmdConfig config() const { return config_with(parse_weights(opts_.weights)); }

  TmdConfig config_with(WeightFn w) const {
    TmdConfig cfg;
    cfg.depth = opts_.depth;
    cfg.weights = std::move(w);
    cfg.norm = parse_norm(opts_.norm);
    cfg.check();
    return cfg;
  }

  // Verification runs default to w = eta unless --weights was given.
  std::vector<TmdConfig> verify_configs() const {
    std::vector<TmdConfig> out;
    if (opts_.sweep) {
      for (double lambda : kSweep) out.push_back(config_with(WeightFn::constant(lambda)));
    } else if (opts_.weights_given) {
      out.push_back(config());
    } else {
      out.push_back(config_with(WeightFn::constant(opts_.eta)));
    }
    return out;
  }

  Dataset dataset() const {
    if (!opts_.synthetic.empty()) return synthetic_dataset(opts_.synthetic[0], opts_.synthetic[1]);
    if (opts_.dataset.empty()) throw ConfigError("--dataset is required");
    if (opts_.format == "jsonl") return load_jsonl(opts_.dataset);
    if (opts_.format == "tu") {
      std::filesystem::path dir(opts_.dataset);
      std::string name = opts_.tu_name;
      if (name.empty()) name = std::filesystem::path(dir).lexically_normal().filename().string();
      if (name.empty()) name = dir.parent_path().filename().string();
      return load_tu(dir, name);
    }
    throw ConfigError("unknown --format '" + opts_.format + "' (expected jsonl or tu)");
  }

  void emit(const std::string& text) {
    if (opts_.out.empty()) {
      out_ << text;
      return;
    }
    std::ofstream f(opts_.out, std::ios::binary);
    if (!f) throw IoError("cannot write " + opts_.out);
    f << text;
    if (!f) throw IoError("write failed for " + opts_.out);
  }

  void report(const std::string& line) { (opts_.out.empty() ? err_ : out_) << line << '\n'; }

  std::ostream& out() { return out_; }

 private:
  Options opts_;
  std::ostream& out_;
  std::ostream& err_;
};

inline std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

inline std::filesystem::path sidecar_path(const std::string& cache) { return cache + ".hash"; }

struct MatrixSpec {
  std::string metric;
  std::uint32_t depth = 0;
  std::string preset;
};

inline MatrixSpec matrix_spec(const std::string& method, const Options& opts, const TmdConfig& cfg) {
  if (method == "tmd") return {tmd_metric_tag(cfg), static_cast<std::uint32_t>(cfg.depth), cfg.weights.preset()};
  if (method == "wl") return {"wl", static_cast<std::uint32_t>(opts.wl_iters), ""};
  if (method == "feature") return {"feature:l2", 0, ""};
  throw ConfigError("unknown method '" + method + "' (expected tmd, wl, feature or random)");
}

inline DistanceMatrix compute_matrix(const std::string& method, const Dataset& ds, const Options& opts,
                                     const TmdConfig& cfg) {
  if (ds.empty()) throw InputError("dataset is empty");
  if (method == "tmd") return pairwise_matrix(ds, cfg);
  if (method == "wl") return wl_pseudometric_matrix(ds, opts.wl_iters);
  return feature_distance_matrix(ds);
}

/// Loads the matrix from --cache when present (metadata and dataset hash must
/// match, otherwise CacheMismatchError) or computes it and fills the cache.
inline DistanceMatrix cached_matrix(Context& ctx, const std::string& method, const Dataset& ds,
                                    const TmdConfig& cfg, bool use_cache = true) {
  const Options& opts = ctx.opts();
  const MatrixSpec spec = matrix_spec(method, opts, cfg);
  const std::string cache = use_cache ? opts.cache : std::string();
  const std::string hash = hex64(dataset_hash(ds));
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  if (!cache.empty() && std::filesystem::exists(cache)) {
    DistanceMatrix dm = read_distance_cache(cache);
    std::string stored_hash;
    std::ifstream side(sidecar_path(cache));
    if (side) side >> stored_hash;
    std::string problem;
    if (dm.metric != spec.metric) problem = "metric " + dm.metric + " != " + spec.metric;
    else if (dm.depth != spec.depth)
      problem = "depth " + std::to_string(dm.depth) + " != " + std::to_string(spec.depth);
    else if (dm.weight_preset != spec.preset) problem = "preset " + dm.weight_preset + " != " + spec.preset;
    else if (dm.n != ds.size()) problem = "n " + std::to_string(dm.n) + " != " + std::to_string(ds.size());
    else if (stored_hash != hash) problem = "dataset hash " + stored_hash + " != " + hash;
    if (!problem.empty()) throw CacheMismatchError("cache " + cache + " does not match this run: " + problem);
    ctx.err() << "cache hit: " << cache << '\n';
    if (opts.timing) ctx.err() << "matrix time ms: " << elapsed() << '\n';
    return dm;
  }

  DistanceMatrix dm = compute_matrix(method, ds, opts, cfg);
  if (opts.timing) ctx.err() << "matrix time ms: " << elapsed() << '\n';
  if (!cache.empty()) {
    write_distance_cache(cache, dm);
    std::ofstream side(sidecar_path(cache));
    side << hash << '\n';
    if (!side) throw IoError("cannot write " + sidecar_path(cache).string());
    ctx.err() << "cache written: " << cache << '\n';
  }
  return dm;
}

inline int cmd_dist(Context& ctx) {
  const Options& opts = ctx.opts();
  if (opts.out.empty() && opts.cache.empty()) throw ConfigError("dist needs --out or --cache");
  const Dataset ds = ctx.dataset();
  const TmdConfig cfg = ctx.config();
  const DistanceMatrix dm = cached_matrix(ctx, "tmd", ds, cfg);
  if (!opts.out.empty()) {
    write_distance_cache(opts.out, dm);
    std::ofstream side(sidecar_path(opts.out));
    side << hex64(dataset_hash(ds)) << '\n';
  }
  const auto bytes = encode_distance_cache(dm);
  const std::string checksum = hex64(fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
  if (opts.json) {
    ctx.out() << nlohmann::json{{"n", dm.n}, {"pairs", dm.values.size()}, {"checksum", checksum}}.dump() << '\n';
  } else {
    ctx.out() << "n=" << dm.n << " pairs=" << dm.values.size() << " checksum=" << checksum << '\n';
  }
  return kOk;
}

inline int cmd_treenorm(Context& ctx) {
  const Dataset ds = ctx.dataset();
  const auto values = tree_norm_batch(ds, ctx.config());
  std::string text;
  if (ctx.opts().json) {
    text = nlohmann::json(values).dump() + "\n";
  } else {
    for (double v : values) text += detail::format_double(v) + "\n";
  }
  ctx.emit(text);
  return kOk;
}

inline int cmd_subsample_graphs(Context& ctx) {
  const Options& opts = ctx.opts();
  const Dataset ds = ctx.dataset();
  const TmdConfig cfg = ctx.config();
  if (opts.k < 1 || opts.k > ds.size()) {
    throw ConfigError("k = " + std::to_string(opts.k) + " must lie in [1, " + std::to_string(ds.size()) + "]");
  }
  Selection sel;
  if (opts.method == "random") {
    if (!opts.cache.empty()) {
      const DistanceMatrix dm = cached_matrix(ctx, "tmd", ds, cfg);
      sel = random_selection(ds.size(), opts.k, opts.seed, &dm);
    } else {
      sel = random_selection(ds.size(), opts.k, opts.seed);
    }
  } else {
    const DistanceMatrix dm = cached_matrix(ctx, opts.method, ds, cfg);
    sel = kmedoids(dm, opts.k, opts.seed, opts.max_iter);
    sel.method = opts.method;
  }
  ctx.emit(selection_to_json(sel).dump() + "\n");
  return kOk;
}

inline int cmd_subsample_nodes(Context& ctx) {
  const Options& opts = ctx.opts();
  const Dataset ds = ctx.dataset();
  const auto subs = subsample_dataset(ds, opts.frac, ctx.config(), parse_heuristics(opts.heuristics), opts.seed);
  std::string text;
  double eps = 0.0;
  for (const auto& s : subs) {
    text += node_subsample_to_json(s).dump() + "\n";
    eps += s.tmd;
  }
  ctx.emit(text);
  const double mean = subs.empty() ? 0.0 : eps / static_cast<double>(subs.size());
  ctx.report("graphs=" + std::to_string(subs.size()) + " mean_epsilon=" + detail::format_double(mean));
  return kOk;
}

inline std::vector<GinModel> hypotheses(const Options& opts, std::size_t feature_dim, std::size_t depth) {
  std::vector<GinModel> hs;
  for (std::size_t h = 0; h < opts.hypotheses; ++h) {
    hs.push_back(random_gin(opts.seed * 1000003ULL + h + 1, feature_dim, opts.hidden, depth, opts.eta));
  }
  return hs;
}

inline const char* kPresetDiagnostic =
    "preset-conditional check failed: the stability bound holds only for a suitable weight function w, and "
    "the weight presets tried here are not proven to be one";

inline int verify_stability(Context& ctx) {
  const Options& opts = ctx.opts();
  const Dataset ds = ctx.dataset();
  if (ds.size() < 2) throw InputError("stability check needs at least two graphs");
  if (opts.hypotheses < 1) throw ConfigError("--hypotheses must be at least 1");
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  std::vector<std::pair<Graph, Graph>> pairs;
  while (pairs.size() < opts.pairs) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (i != j) pairs.emplace_back(ds[i], ds[j]);
  }
  const auto models = hypotheses(opts, ds.feature_dim, opts.depth);

  nlohmann::json reports = nlohmann::json::array();
  bool any_pass = false;
  for (const TmdConfig& cfg : ctx.verify_configs()) {
    StabilityReport total;
    total.preset = cfg.weights.preset();
    for (const GinModel& m : models) {
      const StabilityReport r = stability_report(m, pairs, cfg);
      total.ratios.insert(total.ratios.end(), r.ratios.begin(), r.ratios.end());
      total.max_ratio = std::max(total.max_ratio, r.max_ratio);
      total.violations += r.violations;
      total.infinite += r.infinite;
      total.lipschitz_product = std::max(total.lipschitz_product, r.lipschitz_product);
    }
    nlohmann::json j = stability_to_json(total);
    j["models"] = models.size();
    j["depth"] = cfg.depth;
    j["passed"] = total.violations == 0;
    any_pass = any_pass || total.violations == 0;
    reports.push_back(std::move(j));
  }
  nlohmann::json doc = opts.sweep ? nlohmann::json{{"mode", "stability"}, {"sweep", reports}} : reports[0];
  if (!opts.sweep) doc["mode"] = "stability";
  doc["passed"] = any_pass;
  ctx.emit(doc.dump() + "\n");
  if (!any_pass) {
    ctx.err() << kPresetDiagnostic << '\n';
    return kPresetCaveat;
  }
  return kOk;
}

inline int verify_erm(Context& ctx, bool graph_mode) {
  const Options& opts = ctx.opts();
  const Dataset ds = ctx.dataset();
  const auto labels = dataset_labels(ds);
  const auto models = hypotheses(opts, ds.feature_dim, opts.depth);
  if (models.empty()) throw ConfigError("--hypotheses must be at least 1");
  const auto configs = ctx.verify_configs();

  nlohmann::json reports = nlohmann::json::array();
  bool any_pass = false, chains_hold = true;
  for (const TmdConfig& cfg : configs) {
    ErmReport r;
    nlohmann::json extra;
    if (graph_mode) {
      const std::size_t k = opts.k == 0 ? std::min<std::size_t>(5, ds.size()) : opts.k;
      if (k > ds.size()) throw ConfigError("k exceeds dataset size");
      const DistanceMatrix dm = cached_matrix(ctx, "tmd", ds, cfg, configs.size() == 1);
      const Selection sel = kmedoids(dm, k, opts.seed, opts.max_iter);
      r = finite_erm_check(ds, labels, models, sel, dm);
      extra = selection_to_json(sel);
    } else {
      const auto subs = subsample_dataset(ds, opts.frac, cfg, parse_heuristics(opts.heuristics), opts.seed);
      r = finite_erm_check(ds, labels, models, subs);
      extra = {{"frac", opts.frac}};
    }
    nlohmann::json j = erm_to_json(r);
    j["preset"] = cfg.weights.preset();
    j["selection"] = std::move(extra);
    chains_hold = chains_hold && r.chain_ok();
    any_pass = any_pass || r.satisfied;
    reports.push_back(std::move(j));
  }
  nlohmann::json doc = opts.sweep ? nlohmann::json{{"sweep", reports}} : reports[0];
  doc["mode"] = graph_mode ? "erm-graphs" : "erm-nodes";
  doc["passed"] = any_pass;
  ctx.emit(doc.dump() + "\n");
  if (!chains_hold) {
    ctx.err() << "assertion failed: the Lipschitz loss-gap chain was violated\n";
    return kAssertion;
  }
  if (!any_pass) {
    ctx.err() << kPresetDiagnostic << '\n';
    return kPresetCaveat;
  }
  return kOk;
}

inline int verify_wl_counterexample(Context& ctx) {
  const Options& opts = ctx.opts();
  const auto [a, b] = feature_scaled_pair();
  const Dataset pair = make_dataset("feature-scaled-pair", {a, b});
  const double wl = wl_pseudometric_matrix(pair, opts.wl_iters).values[0];
  const GinModel m = identity_gin(1, opts.depth, opts.eta);
  const double gap = l2_distance(gin_forward(m, a), gin_forward(m, b));
  const TmdConfig cfg = ctx.verify_configs().front();
  const double d = tmd(a, b, cfg);
  const bool holds = wl == 0.0 && gap > 1e-6;
  ctx.emit(nlohmann::json{{"mode", "wl-counterexample"},
                          {"wl_distance", wl},
                          {"gin_gap", gap},
                          {"tmd", d},
                          {"wl_iters", opts.wl_iters},
                          {"passed", holds}}
               .dump() +
           "\n");
  if (!holds) {
    ctx.err() << "assertion failed: expected zero WL distance and a positive GIN gap\n";
    return kAssertion;
  }
  return kOk;
}

inline int cmd_verify(Context& ctx) {
  const std::string& mode = ctx.opts().mode;
  if (mode == "stability") return verify_stability(ctx);
  if (mode == "erm-graphs") return verify_erm(ctx, true);
  if (mode == "erm-nodes") return verify_erm(ctx, false);
  if (mode == "wl-counterexample") return verify_wl_counterexample(ctx);
  throw ConfigError("unknown verify mode '" + mode + "'");
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opts;
  CLI::App app{"Tree mover's distance tools for graph datasets", "tmdcore"};
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--dataset", opts.dataset, "JSONL file or TU directory");
  app.add_option("--format", opts.format, "jsonl or tu")->check(CLI::IsMember({"jsonl", "tu"}));
  app.add_option("--tu-name", opts.tu_name, "TU file prefix (default: directory name)");
  app.add_option("--depth", opts.depth, "TMD depth L")->check(CLI::PositiveNumber);
  auto* weights = app.add_option("--weights", opts.weights, "const:<lambda> or table:<w1,...>");
  app.add_option("--norm", opts.norm, "feature norm, l1 or l2");
  app.add_option("--seed", opts.seed);
  app.add_option("--out", opts.out, "output path (default: stdout)");
  app.add_option("--cache", opts.cache, "distance-matrix cache file");
  app.add_flag("--json", opts.json, "machine-readable output");
  app.add_flag("--timing", opts.timing, "report matrix build time on stderr");

  auto* dist = app.add_subcommand("dist", "pairwise TMD matrix into a binary cache");
  auto* treenorm = app.add_subcommand("treenorm", "tree norm of every graph");
  auto* graphs = app.add_subcommand("subsample-graphs", "k-medoids graph coreset");
  graphs->add_option("--k", opts.k)->required();
  graphs->add_option("--method", opts.method)->check(CLI::IsMember({"tmd", "wl", "feature", "random"}));
  graphs->add_option("--max-iter", opts.max_iter);
  graphs->add_option("--wl-iters", opts.wl_iters);
  auto* nodes = app.add_subcommand("subsample-nodes", "per-graph node subsets by tree norm");
  nodes->add_option("--frac", opts.frac)->required();
  nodes->add_option("--heuristics", opts.heuristics, "comma list of bfs, rw, kcore, or all");
  auto* verify = app.add_subcommand("verify", "empirical stability and loss-bound checks");
  verify->add_option("mode", opts.mode)
      ->required()
      ->check(CLI::IsMember({"stability", "erm-graphs", "erm-nodes", "wl-counterexample"}));
  verify->add_option("--synthetic", opts.synthetic, "N SEED: built-in random dataset")->expected(2);
  verify->add_option("--pairs", opts.pairs);
  verify->add_option("--hypotheses", opts.hypotheses);
  verify->add_option("--hidden", opts.hidden);
  verify->add_option("--eta", opts.eta)->check(CLI::PositiveNumber);
  verify->add_option("--k", opts.k);
  verify->add_option("--frac", opts.frac);
  verify->add_option("--heuristics", opts.heuristics);
  verify->add_option("--max-iter", opts.max_iter);
  verify->add_option("--wl-iters", opts.wl_iters);
  verify->add_flag("--sweep", opts.sweep, "try w = lambda for lambda in 0.5, 1, 2, 4");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kConfig;
  }
  opts.weights_given = weights->count() > 0;

  Context ctx(std::move(opts), out, err);
  try {
    if (*dist) return cmd_dist(ctx);
    if (*treenorm) return cmd_treenorm(ctx);
    if (*graphs) return cmd_subsample_graphs(ctx);
    if (*nodes) return cmd_subsample_nodes(ctx);
    return cmd_verify(ctx);
  } catch (const CacheMismatchError& e) {
    err << "error: " << e.what() << '\n';
    return kCacheMismatch;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const SizeError& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
}

}  // namespace tmdcore::cli
