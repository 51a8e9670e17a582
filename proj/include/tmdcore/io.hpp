#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tmdcore/errors.hpp"
#include "tmdcore/graph.hpp"

namespace tmdcore {

namespace detail {

inline std::string line_prefix(std::size_t line_no) {
  return "line " + std::to_string(line_no) + ": ";
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& where) {
  T value{};
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw InputError(where + "cannot parse number '" + text + "'");
  }
  return value;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace detail

inline Graph graph_from_json(const nlohmann::json& j) {
  const auto n = j.at("n").get<std::size_t>();
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw InputError("edge must be a pair [u,v]");
    edges.emplace_back(e[0].get<NodeId>(), e[1].get<NodeId>());
  }
  auto rows = j.at("features").get<std::vector<std::vector<double>>>();
  std::optional<std::int64_t> label;
  if (j.contains("label") && !j.at("label").is_null()) label = j.at("label").get<std::int64_t>();
  Graph g = make_graph(n, edges, rows, label);
  if (j.contains("id")) g.id = j.at("id").get<std::int64_t>();
  return g;
}

inline nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : g.edges) edges.push_back({e.u, e.v});
  nlohmann::json rows = nlohmann::json::array();
  for (NodeId v = 0; v < g.node_count; ++v) {
    auto f = g.feature(v);
    rows.push_back(std::vector<double>(f.begin(), f.end()));
  }
  nlohmann::json out;
  out["id"] = g.id;
  out["n"] = g.node_count;
  out["edges"] = std::move(edges);
  out["features"] = std::move(rows);
  out["label"] = g.label ? nlohmann::json(*g.label) : nlohmann::json(nullptr);
  return out;
}

/// Parses one graph object per non-blank line.
inline Dataset read_jsonl(std::istream& in, std::string name) {
  std::vector<Graph> graphs;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    Graph g;
    try {
      const auto j = nlohmann::json::parse(line);
      g = graph_from_json(j);
      if (!j.contains("id")) g.id = static_cast<std::int64_t>(graphs.size());
    } catch (const nlohmann::json::exception& e) {
      throw InputError(detail::line_prefix(line_no) + "parse error: " + e.what());
    } catch (const InputError& e) {
      throw InputError(detail::line_prefix(line_no) + e.what());
    }
    if (g.node_count > 0) {
      if (dim == 0) {
        dim = g.feature_dim;
      } else if (g.feature_dim != dim) {
        throw InputError(detail::line_prefix(line_no) + "feature dimension mismatch: " +
                         std::to_string(g.feature_dim) + " vs " + std::to_string(dim));
      }
    }
    graphs.push_back(std::move(g));
  }
  return make_dataset(std::move(name), std::move(graphs));
}

inline Dataset load_jsonl(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_jsonl(in, path.stem().string());
}

inline void write_jsonl(std::ostream& out, const Dataset& ds) {
  for (const Graph& g : ds.graphs) out << graph_to_json(g).dump() << '\n';
}

inline void save_jsonl(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_jsonl(out, ds);
  if (!out) throw IoError("write failed for " + path.string());
}

/// Reads the flat-file benchmark layout `<name>_A.txt`, `<name>_graph_indicator.txt`
/// and the optional `<name>_node_attributes.txt`, `<name>_graph_labels.txt`.
/// File indices are 1-based. Both edge directions may be listed; each undirected
/// edge is kept once and self-loops are dropped.
inline Dataset load_tu(const std::filesystem::path& dir, const std::string& name) {
  const auto file = [&](const char* suffix) { return dir / (name + suffix); };
  const auto indicator_path = file("_graph_indicator.txt");
  const auto adjacency_path = file("_A.txt");
  for (const auto& p : {indicator_path, adjacency_path}) {
    if (!std::filesystem::exists(p)) throw IoError("missing mandatory file " + p.string());
  }

  std::vector<std::size_t> graph_of;  // 0-based graph per 0-based node
  {
    auto in = detail::open_input(indicator_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto t = detail::trim(line);
      if (t.empty()) continue;
      const std::string where = indicator_path.filename().string() + " " +
                                detail::line_prefix(line_no);
      auto gid = detail::parse_number<std::size_t>(t, where);
      if (gid == 0) throw InputError(where + "graph ids are 1-based");
      graph_of.push_back(gid - 1);
    }
  }
  std::size_t graph_count = 0;
  for (auto gid : graph_of) graph_count = std::max(graph_count, gid + 1);

  std::vector<std::vector<NodeId>> members(graph_count);
  std::vector<NodeId> local(graph_of.size());
  for (NodeId v = 0; v < graph_of.size(); ++v) {
    local[v] = members[graph_of[v]].size();
    members[graph_of[v]].push_back(v);
  }

  std::vector<std::vector<double>> attributes;
  const auto attr_path = file("_node_attributes.txt");
  if (std::filesystem::exists(attr_path)) {
    auto in = detail::open_input(attr_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto t = detail::trim(line);
      if (t.empty()) continue;
      const std::string where = attr_path.filename().string() + " " + detail::line_prefix(line_no);
      std::vector<double> row;
      for (const auto& field : detail::split_commas(t)) {
        row.push_back(detail::parse_number<double>(field, where));
      }
      if (!attributes.empty() && row.size() != attributes.front().size()) {
        throw InputError(where + "ragged attribute row of width " + std::to_string(row.size()) +
                         ", expected " + std::to_string(attributes.front().size()));
      }
      attributes.push_back(std::move(row));
    }
    if (attributes.size() != graph_of.size()) {
      throw InputError(attr_path.filename().string() + ": " + std::to_string(attributes.size()) +
                       " attribute rows for " + std::to_string(graph_of.size()) + " nodes");
    }
  }

  std::vector<std::vector<std::pair<NodeId, NodeId>>> edges(graph_count);
  {
    auto in = detail::open_input(adjacency_path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::vector<Edge>> seen(graph_count);
    while (std::getline(in, line)) {
      ++line_no;
      auto t = detail::trim(line);
      if (t.empty()) continue;
      const std::string where =
          adjacency_path.filename().string() + " " + detail::line_prefix(line_no);
      auto fields = detail::split_commas(t);
      if (fields.size() != 2) throw InputError(where + "expected 'u, v'");
      auto a = detail::parse_number<std::size_t>(fields[0], where);
      auto b = detail::parse_number<std::size_t>(fields[1], where);
      if (a == 0 || b == 0 || a > graph_of.size() || b > graph_of.size()) {
        throw InputError(where + "node index out of range");
      }
      --a;
      --b;
      if (graph_of[a] != graph_of[b]) {
        throw InputError(where + "edge (" + fields[0] + "," + fields[1] +
                         ") crosses graphs " + std::to_string(graph_of[a] + 1) + " and " +
                         std::to_string(graph_of[b] + 1));
      }
      if (a == b) continue;
      edges[graph_of[a]].emplace_back(local[a], local[b]);
    }
  }

  std::vector<std::optional<std::int64_t>> labels(graph_count);
  const auto label_path = file("_graph_labels.txt");
  if (std::filesystem::exists(label_path)) {
    auto in = detail::open_input(label_path);
    std::string line;
    std::size_t line_no = 0;
    std::size_t gi = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto t = detail::trim(line);
      if (t.empty()) continue;
      const std::string where = label_path.filename().string() + " " + detail::line_prefix(line_no);
      if (gi >= graph_count) throw InputError(where + "more labels than graphs");
      labels[gi++] = detail::parse_number<std::int64_t>(t, where);
    }
  }

  std::vector<Graph> graphs;
  graphs.reserve(graph_count);
  const std::size_t dim = attributes.empty() ? 1 : attributes.front().size();
  for (std::size_t gi = 0; gi < graph_count; ++gi) {
    std::vector<std::vector<double>> rows;
    for (NodeId v : members[gi]) {
      rows.push_back(attributes.empty() ? std::vector<double>{1.0} : attributes[v]);
    }
    auto& list = edges[gi];
    for (auto& [u, v] : list) {
      if (u > v) std::swap(u, v);
    }
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    Graph g = make_graph(members[gi].size(), list, rows, labels[gi], dim);
    g.id = static_cast<std::int64_t>(gi);
    graphs.push_back(std::move(g));
  }
  return make_dataset(name, std::move(graphs));
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// 64-bit FNV-1a over the canonical JSONL serialization.
inline std::uint64_t dataset_hash(const Dataset& ds) {
  std::ostringstream os;
  write_jsonl(os, ds);
  return fnv1a64(os.str());
}

}  // namespace tmdcore
