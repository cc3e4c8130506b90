#include "peanut/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace peanut {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::MalformedJson, what);
}

double weight_value(const json& w) {
  if (w.is_number()) return w.get<double>();
  if (w.is_string()) return decode_decimal(w.get<std::string>());
  malformed("edge weight must be a number or decimal string");
}

Index index_value(const json& v, const char* what) {
  if (!v.is_number_integer()) malformed(std::string(what) + " must be an integer");
  return v.get<Index>();
}

json parse_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string encode_decimal(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double decode_decimal(std::string_view s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    malformed("invalid decimal string '" + std::string(s) + "'");
  return x;
}

Graph graph_from_json(const json& j) {
  if (!j.is_object()) malformed("graph must be a JSON object");
  if (!j.contains("num_nodes")) malformed("graph is missing 'num_nodes'");
  const Index n = index_value(j.at("num_nodes"), "num_nodes");
  if (n < 0) malformed("num_nodes must be non-negative");

  std::map<std::pair<Index, Index>, double> weights;
  if (j.contains("edges")) {
    if (!j.at("edges").is_array()) malformed("'edges' must be an array");
    for (const json& e : j.at("edges")) {
      if (!e.is_array() || e.size() < 2 || e.size() > 3) malformed("edge must be [i, j] or [i, j, w]");
      Index a = index_value(e[0], "edge endpoint");
      Index b = index_value(e[1], "edge endpoint");
      const double w = e.size() == 3 ? weight_value(e[2]) : 1.0;
      if (a > b) std::swap(a, b);
      const auto [it, inserted] = weights.emplace(std::pair(a, b), w);
      if (!inserted && it->second != w)
        throw Error(ErrorCode::AsymmetricWeights,
                    "edge (" + std::to_string(a) + ", " + std::to_string(b) +
                        ") is listed with different weights");
    }
  }
  std::vector<Edge> edges;
  edges.reserve(weights.size());
  for (const auto& [key, w] : weights) edges.push_back({key.first, key.second, w});

  if (!j.contains("features") || !j.at("features").is_array()) malformed("graph is missing 'features'");
  const json& f = j.at("features");
  if (static_cast<Index>(f.size()) != n)
    throw Error(ErrorCode::FeatureShape, "features have " + std::to_string(f.size()) +
                                             " rows but num_nodes is " + std::to_string(n));
  const Index d = n == 0 ? 0 : static_cast<Index>(f.at(0).size());
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    const json& row = f.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Index>(row.size()) != d)
      throw Error(ErrorCode::FeatureShape, "feature row " + std::to_string(i) + " has the wrong width");
    for (Index k = 0; k < d; ++k) {
      const json& v = row.at(static_cast<std::size_t>(k));
      x(i, k) = v.is_string() ? decode_decimal(v.get<std::string>())
                              : (v.is_number() ? v.get<double>() : (malformed("feature entry must be numeric"), 0.0));
    }
  }

  std::optional<std::vector<int>> labels;
  if (j.contains("labels") && !j.at("labels").is_null()) {
    if (!j.at("labels").is_array()) malformed("'labels' must be an array");
    labels.emplace();
    for (const json& l : j.at("labels")) labels->push_back(static_cast<int>(index_value(l, "label")));
  }
  std::optional<double> target;
  if (j.contains("target") && !j.at("target").is_null()) {
    const json& t = j.at("target");
    if (!t.is_number()) malformed("'target' must be numeric");
    target = t.get<double>();
  }
  return Graph(n, std::move(edges), std::move(x), std::move(labels), target);
}

json graph_to_json(const Graph& g) {
  json j;
  j["num_nodes"] = g.num_nodes();
  json edges = json::array();
  for (const Edge& e : g.edges()) edges.push_back(json::array({e.source, e.target, e.weight}));
  j["edges"] = std::move(edges);
  json features = json::array();
  for (Index i = 0; i < g.num_nodes(); ++i) {
    json row = json::array();
    for (Index k = 0; k < g.feature_dim(); ++k) row.push_back(g.features()(i, k));
    features.push_back(std::move(row));
  }
  j["features"] = std::move(features);
  if (g.node_labels()) j["labels"] = *g.node_labels();
  if (g.graph_target()) j["target"] = *g.graph_target();
  return j;
}

std::vector<Graph> load_graphs(const std::filesystem::path& path) {
  const json j = parse_file(path);
  std::vector<Graph> out;
  const json* list = nullptr;
  if (j.is_array()) {
    list = &j;
  } else if (j.is_object() && j.contains("graphs")) {
    list = &j.at("graphs");
    if (!list->is_array()) malformed("'graphs' must be an array");
  }
  if (list == nullptr) {
    out.push_back(graph_from_json(j));
    return out;
  }
  for (const json& g : *list) out.push_back(graph_from_json(g));
  return out;
}

Graph load_graph(const std::filesystem::path& path) {
  std::vector<Graph> graphs = load_graphs(path);
  require(graphs.size() == 1, ErrorCode::InvalidArgument,
          path.string() + " holds " + std::to_string(graphs.size()) + " graphs, expected one");
  return std::move(graphs.front());
}

std::string to_canonical_text(const json& j) { return j.dump(2) + "\n"; }

void save_graph(const Graph& g, const std::filesystem::path& path) {
  write_text_file(path, to_canonical_text(graph_to_json(g)));
}

void save_graphs(std::span<const Graph> graphs, const std::filesystem::path& path) {
  json list = json::array();
  for (const Graph& g : graphs) list.push_back(graph_to_json(g));
  write_text_file(path, to_canonical_text(json{{"graphs", std::move(list)}}));
}

json checkpoint_to_json(const ModelCheckpoint& m) {
  json j;
  j["format"] = "peanut-checkpoint";
  j["version"] = 1;
  j["architecture"] = std::string(to_string(m.architecture));
  j["task"] = std::string(to_string(m.task));
  j["input_dim"] = m.input_dim;
  j["hidden_dim"] = m.hidden_dim;
  j["num_classes"] = m.num_classes ? json(*m.num_classes) : json(nullptr);
  j["self_loops"] = m.self_loops;
  j["uses_edge_weights"] = m.uses_edge_weights;
  j["split_seed"] = m.split_seed;
  json weights = json::array();
  for (const auto& [name, value] : m.weights.entries()) {
    json data = json::array();
    for (Index r = 0; r < value.rows(); ++r)
      for (Index c = 0; c < value.cols(); ++c) data.push_back(encode_decimal(value(r, c)));
    weights.push_back({{"name", name}, {"rows", value.rows()}, {"cols", value.cols()}, {"data", data}});
  }
  j["weights"] = std::move(weights);
  return j;
}

ModelCheckpoint checkpoint_from_json(const json& j) {
  if (!j.is_object()) malformed("checkpoint must be a JSON object");
  for (const char* key : {"architecture", "task", "input_dim", "hidden_dim", "weights"})
    if (!j.contains(key)) malformed(std::string("checkpoint is missing '") + key + "'");
  ModelCheckpoint m;
  m.architecture = parse_architecture(j.at("architecture").get<std::string>());
  m.task = parse_task(j.at("task").get<std::string>());
  m.input_dim = index_value(j.at("input_dim"), "input_dim");
  m.hidden_dim = index_value(j.at("hidden_dim"), "hidden_dim");
  if (j.contains("num_classes") && !j.at("num_classes").is_null())
    m.num_classes = index_value(j.at("num_classes"), "num_classes");
  m.self_loops = j.value("self_loops", false);
  m.uses_edge_weights = j.value("uses_edge_weights", consumes_edge_weights(m.architecture));
  m.split_seed = j.value("split_seed", std::uint64_t{0});
  if (!j.at("weights").is_array()) malformed("'weights' must be an array");
  for (const json& w : j.at("weights")) {
    for (const char* key : {"name", "rows", "cols", "data"})
      if (!w.contains(key)) malformed(std::string("weight entry is missing '") + key + "'");
    const Index rows = index_value(w.at("rows"), "rows");
    const Index cols = index_value(w.at("cols"), "cols");
    const json& data = w.at("data");
    const std::string name = w.at("name").get<std::string>();
    require(rows >= 0 && cols >= 0 && data.is_array() &&
                static_cast<Index>(data.size()) == rows * cols,
            ErrorCode::Shape, "weight '" + name + "' data length does not match its shape");
    Matrix value(rows, cols);
    std::size_t k = 0;
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        const json& v = data.at(k++);
        value(r, c) = v.is_string() ? decode_decimal(v.get<std::string>()) : v.get<double>();
      }
    m.weights.add(name, std::move(value));
  }
  validate_checkpoint(m);
  return m;
}

void save_checkpoint(const ModelCheckpoint& m, const std::filesystem::path& path) {
  write_text_file(path, to_canonical_text(checkpoint_to_json(m)));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(parse_file(path));
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

DatasetManifest make_manifest(std::string name, Task task, std::span<const Graph> graphs,
                              std::string source, std::uint64_t split_seed) {
  DatasetManifest m;
  m.name = std::move(name);
  m.task = task;
  m.graphs = static_cast<Index>(graphs.size());
  m.feature_dim = graphs.empty() ? 0 : graphs.front().feature_dim();
  m.source = std::move(source);
  m.split_seed = split_seed;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  int max_class = -1;
  for (const Graph& g : graphs) {
    h ^= fnv1a64(graph_to_json(g).dump());
    h *= 0x100000001b3ULL;
    if (task == Task::NodeClassification && g.node_labels())
      for (int l : *g.node_labels()) max_class = std::max(max_class, l);
    if (task == Task::GraphClassification && g.graph_target())
      max_class = std::max(max_class, static_cast<int>(*g.graph_target()));
  }
  if (max_class >= 0) m.classes = max_class + 1;
  m.content_hash = hex64(h);
  return m;
}

json manifest_to_json(const DatasetManifest& m) {
  return {{"name", m.name},
          {"task", std::string(to_string(m.task))},
          {"graphs", m.graphs},
          {"feature_dim", m.feature_dim},
          {"classes", m.classes ? json(*m.classes) : json(nullptr)},
          {"source", m.source},
          {"split_seed", m.split_seed},
          {"content_hash", m.content_hash}};
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace peanut
