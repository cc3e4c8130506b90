#pragma once

#include "peanut/graph.hpp"
#include "peanut/models.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace peanut {

// Graph JSON:
//   { "num_nodes": N, "edges": [[i, j, w], ...], "features": [[...], ...],
//     "labels": [...]?, "target": x? }
// A file holds one graph object, an array of them, or {"graphs": [...]}.
// Edge weights may be numbers or decimal strings; an edge listed in both
// orientations must carry the same weight.

Graph graph_from_json(const nlohmann::json& j);
nlohmann::json graph_to_json(const Graph& g);

std::vector<Graph> load_graphs(const std::filesystem::path& path);
/// Exactly one graph; a multi-graph file is rejected.
Graph load_graph(const std::filesystem::path& path);
void save_graph(const Graph& g, const std::filesystem::path& path);
void save_graphs(std::span<const Graph> graphs, const std::filesystem::path& path);

/// Canonical text: sorted keys, two-space indent, trailing newline.
std::string to_canonical_text(const nlohmann::json& j);

// Checkpoint JSON stores every weight entry as a decimal string with 17
// significant digits, row-major, so reloading is bit-exact.

nlohmann::json checkpoint_to_json(const ModelCheckpoint& m);
ModelCheckpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const ModelCheckpoint& m, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_decimal(double x);
double decode_decimal(std::string_view s);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t h);

struct DatasetManifest {
  std::string name;
  Task task = Task::NodeClassification;
  Index graphs = 0;
  Index feature_dim = 0;
  std::optional<Index> classes;
  std::string source;
  std::uint64_t split_seed = 0;
  /// FNV-1a of the canonical graph JSON.
  std::string content_hash;
};

DatasetManifest make_manifest(std::string name, Task task, std::span<const Graph> graphs,
                              std::string source, std::uint64_t split_seed);
nlohmann::json manifest_to_json(const DatasetManifest& m);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace peanut
