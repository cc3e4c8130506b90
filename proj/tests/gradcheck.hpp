#pragma once

// Central finite differences against the analytic gradients of the trainer.

#include "oracles.hpp"
#include "peanut/models.hpp"
#include "peanut/train.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace gradcheck {

using namespace peanut;

struct Result {
  double max_rel = 0.0;
  Index checked = 0;
  Index failed = 0;
  Index min_entries_per_matrix = 0;
  std::string worst;
};

inline constexpr double kStep = 1e-5;
inline constexpr double kRelTol = 1e-5;
// Entries whose gradient is numerically zero are judged on absolute error.
inline constexpr double kAbsTol = 1e-9;

inline Graph random_binary_graph(Index n, double p, Index dim, std::mt19937_64& rng,
                                 std::optional<double> target = std::nullopt) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (unit(rng) < p) edges.push_back({i, j, 1.0});
  return Graph(n, edges, oracle::gaussian(n, dim, rng), std::nullopt, target);
}

/// Checks every trainable matrix of one architecture/task pairing.
inline Result check(Architecture arch, Task task, std::uint64_t seed, Index entries = 20) {
  constexpr Index kIn = 7, kHidden = 20, kClasses = 3;
  std::mt19937_64 rng(seed);
  const std::optional<Index> classes =
      is_classification(task) ? std::optional<Index>(kClasses) : std::nullopt;
  ModelCheckpoint m = init_checkpoint(arch, task, kIn, kHidden, classes, false, seed);

  std::function<double(const ModelCheckpoint&)> loss;
  LossGradient analytic;
  if (task == Task::NodeClassification) {
    const Graph g = random_binary_graph(12, 0.3, kIn, rng);
    std::vector<int> labels(12);
    for (auto& l : labels) l = static_cast<int>(rng() % kClasses);
    std::vector<Index> mask(12);
    std::iota(mask.begin(), mask.end(), Index{0});
    const Operator op = model_operator(m, g);
    loss = [=](const ModelCheckpoint& c) {
      return node_classification_loss(c, op, g.features(), labels, mask).loss;
    };
    analytic = node_classification_loss(m, op, g.features(), labels, mask);
  } else {
    std::vector<Graph> graphs;
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < 6; ++i) {
      const double target =
          task == Task::GraphClassification ? static_cast<double>(rng() % kClasses) : noise(rng);
      graphs.push_back(random_binary_graph(5 + i, 0.4, kIn, rng, target));
    }
    std::vector<Index> batch(graphs.size());
    std::iota(batch.begin(), batch.end(), Index{0});
    const auto prepared = prepare_graphs(m, graphs);
    loss = [=](const ModelCheckpoint& c) { return graph_task_loss(c, prepared, batch).loss; };
    analytic = graph_task_loss(m, prepared, batch);
  }

  Result out;
  out.min_entries_per_matrix = std::numeric_limits<Index>::max();
  for (const auto& [name, value] : m.weights.entries()) {
    std::vector<Index> idx(static_cast<std::size_t>(value.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(entries)));
    out.min_entries_per_matrix = std::min<Index>(out.min_entries_per_matrix, static_cast<Index>(idx.size()));
    const Matrix& g = analytic.gradient.at(name);
    for (Index k : idx) {
      ModelCheckpoint plus = m, minus = m;
      plus.weights.at(name).data()[k] += kStep;
      minus.weights.at(name).data()[k] -= kStep;
      const double numeric = (loss(plus) - loss(minus)) / (2 * kStep);
      const double a = g.data()[k];
      const double abs_err = std::abs(a - numeric);
      const double rel = oracle::rel_err(a, numeric);
      ++out.checked;
      const bool ok = rel <= kRelTol || abs_err <= kAbsTol;
      if (!ok) ++out.failed;
      // Report relative error only where the gradient is large enough for it to mean something.
      if (std::max(std::abs(a), std::abs(numeric)) > 1e-6 && rel > out.max_rel) {
        out.max_rel = rel;
        std::ostringstream s;
        s << name << "[" << k << "] analytic " << a << " numeric " << numeric;
        out.worst = s.str();
      }
    }
  }
  return out;
}

}  // namespace gradcheck
