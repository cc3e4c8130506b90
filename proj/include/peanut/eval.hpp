#pragma once

#include "peanut/attack.hpp"
#include "peanut/graph.hpp"
#include "peanut/models.hpp"
#include "peanut/train.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace peanut {

using MetricMap = std::map<std::string, double>;

struct AttackReport {
  Task task = Task::NodeClassification;
  Architecture architecture = Architecture::GCN;
  Variant variant = Variant::Peanut;
  double r = 0.0;
  Index n_v = 0;
  double delta_requested = 0.0;
  double delta_realized = 0.0;
  Index injected_edges = 0;
  MetricMap clean_metrics;
  MetricMap attacked_metrics;
  /// clean - attacked for accuracy/F1, attacked - clean for RMSE/MAE.
  MetricMap metric_drops;
  double efficacy = 0.0;
  std::vector<std::uint64_t> seeds;
  /// Only filled when timing is requested; it would break byte-identical reruns.
  std::optional<double> timing;
  bool normalized_domain = false;
  /// "logits", "log-probs", "embeddings" or "features" (white-box).
  std::string observed = "logits";
  VMode v_mode = VMode::UniformRandom;
  bool converged = true;
  /// Number of instances where the observed embedding was all zero.
  Index degenerate = 0;
  Index graphs_attacked = 0;
  std::string dataset_hash;
};

struct EvalOptions {
  bool record_timing = false;
  /// Graphs above this many nodes (after injection) use sparse operators.
  Index dense_cap = 4096;
};

/// ||Z_p - Z||_F^2 over the real rows.
double attack_efficacy(const Matrix& z_clean, const Matrix& z_attacked_real_rows);

/// Metric map for classification predictions: accuracy and macro_f1, both percent.
MetricMap classification_metrics(std::span<const int> pred, std::span<const int> truth,
                                 int num_classes);
/// rmse and mae.
MetricMap regression_metrics(std::span<const double> pred, std::span<const double> truth);
MetricMap metric_drops(const MetricMap& clean, const MetricMap& attacked);

/// Budget for a node task under `cfg`, honoring the n_v and average-degree overrides.
Budget node_attack_budget(const Graph& g, const AttackConfig& cfg);

/// The perturbation a variant injects given what the attacker observed.
/// `theta` is only consulted for PEANUT-W, which requires an SGC model.
Perturbation build_attack(const ModelCheckpoint& model, const Graph& g, const Matrix& observed,
                          const Budget& budget, const AttackConfig& cfg, std::uint64_t seed,
                          double* eigenvalue = nullptr, bool* converged = nullptr);

/// Embeddings of the real nodes after inserting `p` into `g`.
Matrix attacked_embeddings(const ModelCheckpoint& model, const Graph& g, const Perturbation& p,
                           bool normalized_domain, Index dense_cap = 4096);
/// Full forward on the perturbed graph; graph outputs pool over real and virtual nodes.
ForwardOutput attacked_forward(const ModelCheckpoint& model, const Graph& g,
                               const Perturbation& p, bool normalized_domain,
                               Index dense_cap = 4096);

/// Node-classification attack on the test nodes.
AttackReport run_node_attack(const Graph& g, const ModelCheckpoint& model, const AttackConfig& cfg,
                             std::span<const Index> test_nodes, const EvalOptions& opts = {});
/// Same, with the test nodes taken from the split stored in the checkpoint.
AttackReport run_node_attack(const Graph& g, const ModelCheckpoint& model, const AttackConfig& cfg,
                             const EvalOptions& opts = {});

/// Graph-level attack on the listed test graphs; graph i is attacked with seed
/// cfg.seed ^ i and budget floor(r |E_i|). cfg.num_virtual is required.
AttackReport run_graph_attack(std::span<const Graph> dataset, const ModelCheckpoint& model,
                              const AttackConfig& cfg, std::span<const Index> test_graphs,
                              const EvalOptions& opts = {});
AttackReport run_graph_attack(std::span<const Graph> dataset, const ModelCheckpoint& model,
                              const AttackConfig& cfg, const EvalOptions& opts = {});

/// Split fractions used for a task: 60/20/20 nodes, 80/10/10 graphs.
Split task_split(Task task, Index n, std::uint64_t seed);

nlohmann::json report_to_json(const AttackReport& r);
std::string csv_header();
std::string csv_row(const AttackReport& r);

struct SeedSummary {
  double median = 0.0;
  double mean = 0.0;
  /// Sample standard deviation; zero for a single value.
  double std = 0.0;
};

SeedSummary summarize(std::vector<double> values);
/// Per-metric summaries of attacked metrics, drops and efficacy across reports.
nlohmann::json aggregate_reports(std::span<const AttackReport> reports);

}  // namespace peanut
