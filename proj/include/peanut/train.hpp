#pragma once

#include "peanut/graph.hpp"
#include "peanut/models.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace peanut {

struct Split {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

/// Seeded shuffle of [0, n) cut into train/val/test by fraction.
Split make_split(Index n, std::uint64_t seed, double train_fraction, double val_fraction);

struct NodeDataset {
  Graph graph;
  Split split;
};

struct GraphDataset {
  std::vector<Graph> graphs;
  Split split;
};

/// A graph with the model operator already built.
struct PreparedGraph {
  Operator op;
  Matrix features;
  double target = 0.0;
};

std::vector<PreparedGraph> prepare_graphs(const ModelCheckpoint& m, std::span<const Graph> graphs,
                                          Index dense_cap = 4096);

struct LossGradient {
  double loss = 0.0;
  WeightSet gradient;
};

/// Accumulates dL/dW for the node-embedding network given dL/dZ.
void embeddings_backward(const ModelCheckpoint& m, const Operator& op, const Matrix& x,
                         const Matrix& grad_z, WeightSet& grad);

/// Accumulates dL/dW for pool-and-readout given dL/d(output); returns dL/dZ.
Matrix readout_backward(const ModelCheckpoint& m, const Matrix& z, const RowVector& grad_out,
                        WeightSet& grad);

/// Mean softmax cross-entropy of the logits Z over the nodes in `mask`.
LossGradient node_classification_loss(const ModelCheckpoint& m, const Operator& op,
                                      const Matrix& x, std::span<const int> labels,
                                      std::span<const Index> mask);

/// Mean cross-entropy (classification) or squared error (regression) over `batch`.
LossGradient graph_task_loss(const ModelCheckpoint& m, std::span<const PreparedGraph> graphs,
                             std::span<const Index> batch);

class Adam {
 public:
  Adam(const WeightSet& like, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  void step(WeightSet& weights, const WeightSet& gradient);
  double learning_rate() const { return learning_rate_; }
  void set_learning_rate(double lr) { learning_rate_ = lr; }

 private:
  WeightSet first_;
  WeightSet second_;
  double learning_rate_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long long steps_ = 0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  Index max_epochs = 1000;
  Index patience = 100;
  Index batch_size = 32;
  bool plateau_schedule = true;  // graph tasks only
  double plateau_factor = 0.9;
  Index plateau_patience = 20;
  double min_learning_rate = 1e-4;
  std::uint64_t seed = 0;
};

struct EpochLog {
  Index epoch = 0;
  double loss = 0.0;
  double val_metric = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  std::vector<EpochLog> log;
  Index best_epoch = 0;
  double best_val_metric = 0.0;
};

/// Full-batch training; keeps the weights with the best validation accuracy.
TrainResult train_node_classifier(ModelCheckpoint init, const NodeDataset& data,
                                  const TrainConfig& cfg);

/// Mini-batch training for graph-level tasks; the tracked validation metric is
/// macro-F1 (classification) or RMSE (regression).
TrainResult train_graph_model(ModelCheckpoint init, const GraphDataset& data,
                              const TrainConfig& cfg);

/// Class id stored in a graph target; throws if absent or not an integer in range.
int graph_class(const Graph& g, Index num_classes);

}  // namespace peanut
