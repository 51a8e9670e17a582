#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tmdcore/errors.hpp"

namespace tmdcore {

enum class FeatureNorm { l1, l2 };

inline std::string to_string(FeatureNorm n) { return n == FeatureNorm::l1 ? "l1" : "l2"; }

inline FeatureNorm parse_norm(std::string_view s) {
  if (s == "l1") return FeatureNorm::l1;
  if (s == "l2") return FeatureNorm::l2;
  throw ConfigError("unknown feature norm '" + std::string(s) + "' (expected l1 or l2)");
}

inline double norm(std::span<const double> x, FeatureNorm kind) {
  double acc = 0.0;
  if (kind == FeatureNorm::l1) {
    for (double v : x) acc += std::abs(v);
    return acc;
  }
  for (double v : x) acc += v * v;
  return std::sqrt(acc);
}

inline double distance(std::span<const double> a, std::span<const double> b, FeatureNorm kind) {
  double acc = 0.0;
  if (kind == FeatureNorm::l1) {
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

inline double parse_positive(std::string_view text, std::string_view what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("cannot parse " + std::string(what) + " '" + std::string(text) + "'");
  }
  if (!std::isfinite(value) || value <= 0.0) {
    throw ConfigError(std::string(what) + " must be finite and strictly positive, got '" +
                      std::string(text) + "'");
  }
  return value;
}

}  // namespace detail

// Depth-indexed weights w(1), w(2), ... used by the tree distance. A constant
// preset covers every depth; a table covers depths 1..size().
class WeightFn {
 public:
  static WeightFn constant(double lambda) {
    if (!std::isfinite(lambda) || lambda <= 0.0) {
      throw ConfigError("constant weight must be finite and strictly positive");
    }
    WeightFn w;
    w.constant_ = true;
    w.values_ = {lambda};
    return w;
  }

  static WeightFn table(std::vector<double> values) {
    for (double v : values) {
      if (!std::isfinite(v) || v <= 0.0) {
        throw ConfigError("weight table entries must be finite and strictly positive");
      }
    }
    WeightFn w;
    w.constant_ = false;
    w.values_ = std::move(values);
    return w;
  }

  bool is_constant() const { return constant_; }

  // Largest depth index with a defined weight.
  std::size_t defined_up_to() const {
    return constant_ ? static_cast<std::size_t>(-1) : values_.size();
  }

  double operator()(std::size_t depth) const {
    if (depth == 0 || depth > defined_up_to()) {
      throw ConfigError("weight w(" + std::to_string(depth) + ") is not defined by preset " +
                        preset());
    }
    return constant_ ? values_.front() : values_[depth - 1];
  }

  WeightFn scaled(double factor) const {
    WeightFn w = *this;
    for (double& v : w.values_) v *= factor;
    return w;
  }

  // Canonical text form, re-parseable by parse_weights.
  std::string preset() const {
    if (constant_) return "const:" + detail::format_double(values_.front());
    std::string out = "table:";
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (i) out += ',';
      out += detail::format_double(values_[i]);
    }
    return out;
  }

  bool operator==(const WeightFn&) const = default;

 private:
  bool constant_ = true;
  std::vector<double> values_{1.0};
};

inline constexpr std::string_view kPascalMessage =
    "weight preset 'pascal' is reserved but not defined: the Pascal-triangle weight schedule "
    "is not specified by this library's sources; use const:<lambda> or table:<w1,...,w(L-1)>";

/// Grammar: "const:<float>" | "table:<w1>,<w2>,...". "pascal" is reserved and rejected.
inline WeightFn parse_weights(std::string_view spec) {
  if (spec == "pascal" || spec.starts_with("pascal:")) throw ConfigError(std::string(kPascalMessage));
  if (spec.starts_with("const:")) {
    return WeightFn::constant(detail::parse_positive(spec.substr(6), "constant weight"));
  }
  if (spec.starts_with("table:")) {
    std::vector<double> values;
    std::string_view rest = spec.substr(6);
    if (rest.empty()) return WeightFn::table({});
    while (true) {
      const auto comma = rest.find(',');
      values.push_back(detail::parse_positive(rest.substr(0, comma), "table weight"));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return WeightFn::table(std::move(values));
  }
  throw ConfigError("unknown weight preset '" + std::string(spec) +
                    "' (expected const:<float> or table:<w1,...>)");
}

struct TmdConfig {
  std::size_t depth = 1;
  WeightFn weights = WeightFn::constant(1.0);
  FeatureNorm norm = FeatureNorm::l2;

  void check() const {
    if (depth == 0) throw ConfigError("depth L must be at least 1");
    if (depth >= 2 && weights.defined_up_to() < depth - 1) {
      throw ConfigError("weight preset " + weights.preset() + " defines " +
                        std::to_string(weights.defined_up_to()) + " weights, depth " +
                        std::to_string(depth) + " needs " + std::to_string(depth - 1));
    }
  }
};

}  // namespace tmdcore
