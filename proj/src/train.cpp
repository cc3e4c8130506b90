#include "peanut/train.hpp"

#include "peanut/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace peanut {

namespace {

Matrix relu_mask(const Matrix& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

template <typename Op>
void backward_impl(const ModelCheckpoint& m, const Op& p, const Matrix& x, const Matrix& gz,
                   WeightSet& grad) {
  const WeightSet& w = m.weights;
  switch (m.architecture) {
    case Architecture::SGC: {
      const Matrix px = p * x;
      const Matrix ppx = p * px;
      grad.at("theta").noalias() += ppx.transpose() * gz;
      return;
    }
    case Architecture::GCN: {
      const Matrix sx = p * x;
      const Matrix a1 = sx * w.at("w1");
      const Matrix h = a1.cwiseMax(0.0);
      const Matrix sh = p * h;
      grad.at("w2").noalias() += sh.transpose() * gz;
      const Matrix stg = p.transpose() * gz;
      const Matrix ga1 = (stg * w.at("w2").transpose()).cwiseProduct(relu_mask(a1));
      grad.at("w1").noalias() += sx.transpose() * ga1;
      return;
    }
    case Architecture::GIN: {
      const Matrix q1 = Matrix(p * x) + x;
      const Matrix a1 = q1 * w.at("w1");
      const Matrix r1 = a1.cwiseMax(0.0);
      const Matrix h1 = r1 * w.at("w2");
      const Matrix q2 = Matrix(p * h1) + h1;
      const Matrix a2 = q2 * w.at("w3");
      const Matrix r2 = a2.cwiseMax(0.0);
      grad.at("w4").noalias() += r2.transpose() * gz;
      const Matrix ga2 = (gz * w.at("w4").transpose()).cwiseProduct(relu_mask(a2));
      grad.at("w3").noalias() += q2.transpose() * ga2;
      const Matrix gq2 = ga2 * w.at("w3").transpose();
      const Matrix gh1 = Matrix(p.transpose() * gq2) + gq2;
      grad.at("w2").noalias() += r1.transpose() * gh1;
      const Matrix ga1 = (gh1 * w.at("w2").transpose()).cwiseProduct(relu_mask(a1));
      grad.at("w1").noalias() += q1.transpose() * ga1;
      return;
    }
    case Architecture::SAGE: {
      const Vector inv_deg = inverse_degrees(p);
      const Matrix mx = inv_deg.asDiagonal() * Matrix(p * x);
      const Matrix a1 = x * w.at("w_self1") + mx * w.at("w_nbr1");
      const Matrix h = a1.cwiseMax(0.0);
      const Matrix mh = inv_deg.asDiagonal() * Matrix(p * h);
      grad.at("w_self2").noalias() += h.transpose() * gz;
      grad.at("w_nbr2").noalias() += mh.transpose() * gz;
      const Matrix g_mh = gz * w.at("w_nbr2").transpose();
      const Matrix scaled = inv_deg.asDiagonal() * g_mh;
      const Matrix gh = gz * w.at("w_self2").transpose() + Matrix(p.transpose() * scaled);
      const Matrix ga1 = gh.cwiseProduct(relu_mask(a1));
      grad.at("w_self1").noalias() += x.transpose() * ga1;
      grad.at("w_nbr1").noalias() += mx.transpose() * ga1;
      return;
    }
  }
}

// Softmax cross-entropy of one row; writes dL/dlogits into `grad`.
double cross_entropy_row(const RowVector& logits, int label, RowVector& grad) {
  const double mx = logits.maxCoeff();
  const RowVector e = (logits.array() - mx).exp().matrix();
  const double sum = e.sum();
  grad = e / sum;
  grad(label) -= 1.0;
  return -(logits(label) - mx - std::log(sum));
}

void require_finite_loss(double loss, Index epoch) {
  if (std::isfinite(loss)) return;
  std::ostringstream os;
  os << "non-finite training loss (" << loss << ") at epoch " << epoch;
  throw Error(ErrorCode::NonFiniteLoss, os.str());
}

std::vector<int> node_labels_or_throw(const Graph& g) {
  require(g.node_labels().has_value(), ErrorCode::InvalidArgument,
          "node classification requires node labels");
  return *g.node_labels();
}

template <typename T>
std::vector<T> gather(const std::vector<T>& values, std::span<const Index> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (Index i : idx) out.push_back(values[static_cast<std::size_t>(i)]);
  return out;
}

// Tracks the best validation metric; `higher_is_better` flips the comparison.
struct BestTracker {
  bool higher_is_better = true;
  double best = 0.0;
  double best_tiebreak = std::numeric_limits<double>::infinity();
  bool has_best = false;

  bool improves(double metric, double tiebreak) const {
    if (!has_best) return true;
    if (metric == best) return tiebreak < best_tiebreak;
    return higher_is_better ? metric > best : metric < best;
  }
  void accept(double metric, double tiebreak) {
    best = metric;
    best_tiebreak = tiebreak;
    has_best = true;
  }
};

}  // namespace

Split make_split(Index n, std::uint64_t seed, double train_fraction, double val_fraction) {
  require(n >= 0, ErrorCode::InvalidArgument, "negative split size");
  require(train_fraction >= 0 && val_fraction >= 0 && train_fraction + val_fraction <= 1.0,
          ErrorCode::InvalidArgument, "split fractions must be non-negative and sum to <= 1");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), n_train + n_val)));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), n_train + n_val)),
                order.end());
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

std::vector<PreparedGraph> prepare_graphs(const ModelCheckpoint& m, std::span<const Graph> graphs,
                                          Index dense_cap) {
  std::vector<PreparedGraph> out;
  out.reserve(graphs.size());
  for (const Graph& g : graphs) {
    require(g.graph_target().has_value(), ErrorCode::InvalidArgument,
            "graph-level task requires a target on every graph");
    out.push_back({model_operator(m, g, dense_cap), g.features(), *g.graph_target()});
  }
  return out;
}

int graph_class(const Graph& g, Index num_classes) {
  require(g.graph_target().has_value(), ErrorCode::InvalidArgument, "graph has no target");
  const double t = *g.graph_target();
  require(t == std::floor(t) && t >= 0 && t < static_cast<double>(num_classes),
          ErrorCode::InvalidArgument, "graph target is not a class id in [0, num_classes)");
  return static_cast<int>(t);
}

void embeddings_backward(const ModelCheckpoint& m, const Operator& op, const Matrix& x,
                         const Matrix& grad_z, WeightSet& grad) {
  std::visit([&](const auto& p) { backward_impl(m, p, x, grad_z, grad); }, op);
}

Matrix readout_backward(const ModelCheckpoint& m, const Matrix& z, const RowVector& grad_out,
                        WeightSet& grad) {
  const Matrix& r1 = m.weights.at("readout1");
  const Matrix& r2 = m.weights.at("readout2");
  const RowVector pooled = z.colwise().sum();
  const RowVector a = pooled * r1;
  const RowVector q = a.cwiseMax(0.0);
  grad.at("readout2").noalias() += q.transpose() * grad_out;
  const RowVector ga = (grad_out * r2.transpose()).cwiseProduct(
      (a.array() > 0.0).cast<double>().matrix());
  grad.at("readout1").noalias() += pooled.transpose() * ga;
  const RowVector gp = ga * r1.transpose();
  return Vector::Ones(z.rows()) * gp;
}

LossGradient node_classification_loss(const ModelCheckpoint& m, const Operator& op,
                                      const Matrix& x, std::span<const int> labels,
                                      std::span<const Index> mask) {
  require(!mask.empty(), ErrorCode::EmptyInput, "empty node mask");
  require(static_cast<Index>(labels.size()) == x.rows(), ErrorCode::Shape,
          "label count does not match node count");
  const Matrix z = node_embeddings(m, op, x);
  Matrix gz = Matrix::Zero(z.rows(), z.cols());
  LossGradient out{0.0, zeros_like(m.weights)};
  const double inv = 1.0 / static_cast<double>(mask.size());
  RowVector g;
  for (Index i : mask) {
    const int y = labels[static_cast<std::size_t>(i)];
    require(y >= 0 && y < z.cols(), ErrorCode::InvalidArgument, "label outside class range");
    out.loss += inv * cross_entropy_row(z.row(i), y, g);
    gz.row(i) = inv * g;
  }
  embeddings_backward(m, op, x, gz, out.gradient);
  return out;
}

LossGradient graph_task_loss(const ModelCheckpoint& m, std::span<const PreparedGraph> graphs,
                             std::span<const Index> batch) {
  require(!batch.empty(), ErrorCode::EmptyInput, "empty graph batch");
  LossGradient out{0.0, zeros_like(m.weights)};
  const double inv = 1.0 / static_cast<double>(batch.size());
  RowVector g;
  for (Index idx : batch) {
    const PreparedGraph& pg = graphs[static_cast<std::size_t>(idx)];
    const Matrix z = node_embeddings(m, pg.op, pg.features);
    const RowVector y = readout(m, z);
    if (m.task == Task::GraphClassification) {
      const double t = pg.target;
      require(t == std::floor(t) && t >= 0 && t < static_cast<double>(y.size()),
              ErrorCode::InvalidArgument, "graph target is not a valid class id");
      out.loss += inv * cross_entropy_row(y, static_cast<int>(t), g);
    } else {
      const double diff = y(0) - pg.target;
      out.loss += inv * diff * diff;
      g = RowVector::Constant(1, 2.0 * diff);
    }
    const Matrix gz = readout_backward(m, z, inv * g, out.gradient);
    embeddings_backward(m, pg.op, pg.features, gz, out.gradient);
  }
  return out;
}

Adam::Adam(const WeightSet& like, double learning_rate, double beta1, double beta2, double epsilon)
    : first_(zeros_like(like)),
      second_(zeros_like(like)),
      learning_rate_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon) {}

void Adam::step(WeightSet& weights, const WeightSet& gradient) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  auto& ws = weights.entries();
  const auto& gs = gradient.entries();
  require(ws.size() == gs.size() && ws.size() == first_.size(), ErrorCode::Shape,
          "optimizer state does not match the weight set");
  for (std::size_t k = 0; k < ws.size(); ++k) {
    const Matrix& g = gs[k].value;
    Matrix& m1 = first_.entries()[k].value;
    Matrix& m2 = second_.entries()[k].value;
    m1 = beta1_ * m1 + (1.0 - beta1_) * g;
    m2 = beta2_ * m2 + (1.0 - beta2_) * g.cwiseProduct(g);
    if (learning_rate_ == 0.0) continue;
    ws[k].value.array() -=
        learning_rate_ * (m1.array() / c1) / ((m2.array() / c2).sqrt() + epsilon_);
  }
}

TrainResult train_node_classifier(ModelCheckpoint init, const NodeDataset& data,
                                  const TrainConfig& cfg) {
  require(init.task == Task::NodeClassification, ErrorCode::InvalidArgument,
          "train_node_classifier needs a node-classification checkpoint");
  validate_checkpoint(init);
  require(!data.split.train.empty(), ErrorCode::EmptyInput, "empty training split");
  require(!data.split.val.empty(), ErrorCode::EmptyInput, "empty validation split");
  const std::vector<int> labels = node_labels_or_throw(data.graph);
  const Operator op = model_operator(init, data.graph);
  const Matrix& x = data.graph.features();
  const std::vector<int> val_truth = gather(labels, data.split.val);

  TrainResult result{init, {}, 0, 0.0};
  ModelCheckpoint current = std::move(init);
  Adam adam(current.weights, cfg.learning_rate);
  BestTracker tracker{true};
  Index stale = 0;
  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const LossGradient lg = node_classification_loss(current, op, x, labels, data.split.train);
    require_finite_loss(lg.loss, epoch);
    adam.step(current.weights, lg.gradient);

    const Matrix z = node_embeddings(current, op, x);
    const std::vector<int> pred = gather(argmax_rows(z), data.split.val);
    const double val_acc = accuracy(pred, val_truth);
    double val_loss = 0.0;
    RowVector g;
    for (Index i : data.split.val)
      val_loss += cross_entropy_row(z.row(i), labels[static_cast<std::size_t>(i)], g);
    result.log.push_back({epoch, lg.loss, val_acc, adam.learning_rate()});

    if (tracker.improves(val_acc, val_loss)) {
      tracker.accept(val_acc, val_loss);
      result.checkpoint = current;
      result.best_epoch = epoch;
      result.best_val_metric = val_acc;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

TrainResult train_graph_model(ModelCheckpoint init, const GraphDataset& data,
                              const TrainConfig& cfg) {
  require(is_graph_task(init.task), ErrorCode::InvalidArgument,
          "train_graph_model needs a graph-level checkpoint");
  validate_checkpoint(init);
  require(!data.split.train.empty(), ErrorCode::EmptyInput, "empty training split");
  require(!data.split.val.empty(), ErrorCode::EmptyInput, "empty validation split");
  require(cfg.batch_size >= 1, ErrorCode::InvalidArgument, "batch size must be positive");
  const std::vector<PreparedGraph> prepared = prepare_graphs(init, data.graphs);
  const bool classify = init.task == Task::GraphClassification;
  const Index num_classes = init.output_dim();

  TrainResult result{init, {}, 0, 0.0};
  ModelCheckpoint current = std::move(init);
  Adam adam(current.weights, cfg.learning_rate);
  BestTracker early{classify};
  BestTracker plateau{classify};
  Index stale = 0;
  Index plateau_stale = 0;
  std::mt19937_64 rng(cfg.seed);
  std::vector<Index> order = data.split.train;

  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const Index> batch(order.data() + start, stop - start);
      const LossGradient lg = graph_task_loss(current, prepared, batch);
      require_finite_loss(lg.loss, epoch);
      adam.step(current.weights, lg.gradient);
      epoch_loss += lg.loss * static_cast<double>(batch.size());
    }
    epoch_loss /= static_cast<double>(order.size());

    double val_metric = 0.0;
    double val_loss = 0.0;
    if (classify) {
      std::vector<int> pred, truth;
      RowVector g;
      for (Index i : data.split.val) {
        const PreparedGraph& pg = prepared[static_cast<std::size_t>(i)];
        const RowVector y = forward(current, pg.op, pg.features).graph_output.value();
        const int t = graph_class(data.graphs[static_cast<std::size_t>(i)], num_classes);
        pred.push_back(argmax_rows(y)[0]);
        truth.push_back(t);
        val_loss += cross_entropy_row(y, t, g);
      }
      val_metric = macro_f1(pred, truth, static_cast<int>(num_classes));
    } else {
      std::vector<double> pred, truth;
      for (Index i : data.split.val) {
        const PreparedGraph& pg = prepared[static_cast<std::size_t>(i)];
        pred.push_back(forward(current, pg.op, pg.features).graph_output.value()(0));
        truth.push_back(pg.target);
      }
      val_metric = rmse(pred, truth);
      val_loss = val_metric;
    }
    result.log.push_back({epoch, epoch_loss, val_metric, adam.learning_rate()});

    if (cfg.plateau_schedule) {
      if (plateau.improves(val_metric, val_loss)) {
        plateau.accept(val_metric, val_loss);
        plateau_stale = 0;
      } else if (++plateau_stale >= cfg.plateau_patience) {
        if (adam.learning_rate() > cfg.min_learning_rate)
          adam.set_learning_rate(std::max(adam.learning_rate() * cfg.plateau_factor,
                                          cfg.min_learning_rate));
        plateau_stale = 0;
      }
    }
    if (early.improves(val_metric, val_loss)) {
      early.accept(val_metric, val_loss);
      result.checkpoint = current;
      result.best_epoch = epoch;
      result.best_val_metric = val_metric;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace peanut
