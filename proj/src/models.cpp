#include "peanut/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <utility>

namespace peanut {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

struct Shape {
  Index rows;
  Index cols;
};

std::vector<std::pair<std::string, Shape>> expected_shapes(const ModelCheckpoint& m) {
  const Index in = m.input_dim;
  const Index h = m.hidden_dim;
  const Index e = m.embedding_dim();
  std::vector<std::pair<std::string, Shape>> out;
  switch (m.architecture) {
    case Architecture::SGC:
      out = {{"theta", {in, e}}};
      break;
    case Architecture::GCN:
      out = {{"w1", {in, h}}, {"w2", {h, e}}};
      break;
    case Architecture::GIN:
      out = {{"w1", {in, h}}, {"w2", {h, h}}, {"w3", {h, h}}, {"w4", {h, e}}};
      break;
    case Architecture::SAGE:
      out = {{"w_self1", {in, h}}, {"w_nbr1", {in, h}}, {"w_self2", {h, e}}, {"w_nbr2", {h, e}}};
      break;
  }
  if (is_graph_task(m.task)) {
    out.push_back({"readout1", {e, h}});
    out.push_back({"readout2", {h, m.output_dim()}});
  }
  return out;
}

}  // namespace

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::SGC: return "SGC";
    case Architecture::GCN: return "GCN";
    case Architecture::GIN: return "GIN";
    case Architecture::SAGE: return "SAGE";
  }
  return "?";
}

std::string_view to_string(Task task) {
  switch (task) {
    case Task::NodeClassification: return "node-classification";
    case Task::GraphClassification: return "graph-classification";
    case Task::GraphRegression: return "graph-regression";
  }
  return "?";
}

Architecture parse_architecture(std::string_view name) {
  const std::string u = upper(name);
  if (u == "SGC") return Architecture::SGC;
  if (u == "GCN") return Architecture::GCN;
  if (u == "GIN") return Architecture::GIN;
  if (u == "SAGE") return Architecture::SAGE;
  throw Error(ErrorCode::UnknownArchitecture,
              "unknown architecture '" + std::string(name) + "' (expected SGC, GCN, GIN or SAGE)");
}

Task parse_task(std::string_view name) {
  const std::string u = upper(name);
  if (u == "NODE-CLASSIFICATION" || u == "NC") return Task::NodeClassification;
  if (u == "GRAPH-CLASSIFICATION" || u == "GC") return Task::GraphClassification;
  if (u == "GRAPH-REGRESSION" || u == "GR") return Task::GraphRegression;
  throw Error(ErrorCode::InvalidArgument, "unknown task '" + std::string(name) + "'");
}

void WeightSet::add(std::string name, Matrix value) {
  require(find(name) == nullptr, ErrorCode::InvalidArgument, "duplicate weight '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
}

const Matrix* WeightSet::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e.value;
  return nullptr;
}

const Matrix& WeightSet::at(std::string_view name) const {
  const Matrix* m = find(name);
  require(m != nullptr, ErrorCode::MissingWeight, "missing weight '" + std::string(name) + "'");
  return *m;
}

Matrix& WeightSet::at(std::string_view name) {
  return const_cast<Matrix&>(std::as_const(*this).at(name));
}

Index WeightSet::parameter_count() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

WeightSet zeros_like(const WeightSet& w) {
  WeightSet out;
  for (const auto& e : w.entries()) out.add(e.name, Matrix::Zero(e.value.rows(), e.value.cols()));
  return out;
}

Index ModelCheckpoint::output_dim() const {
  if (task == Task::GraphRegression) return 1;
  return num_classes.value_or(0);
}

Index ModelCheckpoint::embedding_dim() const {
  return is_graph_task(task) ? hidden_dim : output_dim();
}

std::vector<std::string> conv_weight_names(Architecture arch) {
  switch (arch) {
    case Architecture::SGC: return {"theta"};
    case Architecture::GCN: return {"w1", "w2"};
    case Architecture::GIN: return {"w1", "w2", "w3", "w4"};
    case Architecture::SAGE: return {"w_self1", "w_nbr1", "w_self2", "w_nbr2"};
  }
  return {};
}

std::vector<std::string> weight_names(Architecture arch, Task task) {
  auto names = conv_weight_names(arch);
  if (is_graph_task(task)) {
    names.emplace_back("readout1");
    names.emplace_back("readout2");
  }
  return names;
}

Index default_hidden_dim(Task task) { return is_graph_task(task) ? 64 : 16; }

ModelCheckpoint init_checkpoint(Architecture arch, Task task, Index input_dim, Index hidden_dim,
                                std::optional<Index> num_classes, bool self_loops,
                                std::uint64_t seed) {
  require(input_dim >= 1 && hidden_dim >= 1, ErrorCode::InvalidArgument,
          "input and hidden dimensions must be positive");
  if (is_classification(task))
    require(num_classes.has_value() && *num_classes >= 2, ErrorCode::InvalidArgument,
            "classification needs at least two classes");
  ModelCheckpoint m;
  m.architecture = arch;
  m.task = task;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.num_classes = is_classification(task) ? num_classes : std::nullopt;
  m.self_loops = self_loops;
  m.uses_edge_weights = consumes_edge_weights(arch);

  std::mt19937_64 rng(seed);
  for (const auto& [name, shape] : expected_shapes(m)) {
    const double bound = std::sqrt(1.0 / static_cast<double>(shape.rows));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(shape.rows, shape.cols);
    for (Index j = 0; j < w.cols(); ++j)
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    m.weights.add(name, std::move(w));
  }
  return m;
}

void validate_checkpoint(const ModelCheckpoint& m) {
  require(m.input_dim >= 1 && m.hidden_dim >= 1, ErrorCode::Shape,
          "input and hidden dimensions must be positive");
  if (is_classification(m.task))
    require(m.num_classes.has_value() && *m.num_classes >= 2, ErrorCode::Shape,
            "classification checkpoint needs num_classes >= 2");
  require(m.uses_edge_weights == consumes_edge_weights(m.architecture), ErrorCode::InvalidArgument,
          std::string("uses_edge_weights must be ") +
              (consumes_edge_weights(m.architecture) ? "true" : "false") + " for " +
              std::string(to_string(m.architecture)));
  const auto shapes = expected_shapes(m);
  for (const auto& [name, shape] : shapes) {
    const Matrix& w = m.weights.at(name);
    require(w.rows() == shape.rows && w.cols() == shape.cols, ErrorCode::Shape,
            "weight '" + name + "' is " + std::to_string(w.rows()) + "x" +
                std::to_string(w.cols()) + ", expected " + std::to_string(shape.rows) + "x" +
                std::to_string(shape.cols));
    require(w.allFinite(), ErrorCode::Shape, "weight '" + name + "' has non-finite entries");
  }
  require(m.weights.size() == shapes.size(), ErrorCode::Shape,
          "checkpoint carries weights not used by " + std::string(to_string(m.architecture)));
}

Operator model_operator(const ModelCheckpoint& m, const Matrix& adjacency) {
  if (consumes_edge_weights(m.architecture)) return normalize_adjacency(adjacency, m.self_loops);
  require_binary_adjacency(adjacency);
  return adjacency;
}

Operator model_operator(const ModelCheckpoint& m, const SparseMatrix& adjacency) {
  if (consumes_edge_weights(m.architecture)) return normalize_adjacency(adjacency, m.self_loops);
  require_binary_adjacency(adjacency);
  return adjacency;
}

Operator model_operator(const ModelCheckpoint& m, const Graph& g, Index dense_cap) {
  if (g.num_nodes() <= dense_cap) return model_operator(m, g.dense_adjacency());
  return model_operator(m, g.sparse_adjacency());
}

Matrix node_embeddings(const ModelCheckpoint& m, const Operator& op, const Matrix& x) {
  const WeightSet& w = m.weights;
  return std::visit(
      [&](const auto& p) -> Matrix {
        switch (m.architecture) {
          case Architecture::SGC:
            return sgc_forward(p, x, w.at("theta"));
          case Architecture::GCN:
            return gcn_forward(p, x, w.at("w1"), w.at("w2"));
          case Architecture::GIN:
            return gin_forward(p, x, w.at("w1"), w.at("w2"), w.at("w3"), w.at("w4"));
          case Architecture::SAGE:
            return sage_forward(p, x, w.at("w_self1"), w.at("w_nbr1"), w.at("w_self2"),
                                w.at("w_nbr2"));
        }
        throw Error(ErrorCode::UnknownArchitecture, "unknown architecture");
      },
      op);
}

RowVector readout(const ModelCheckpoint& m, const Matrix& z) {
  require(is_graph_task(m.task), ErrorCode::InvalidArgument,
          "readout is only defined for graph-level tasks");
  return pool_and_readout(z, m.weights.at("readout1"), m.weights.at("readout2"));
}

ForwardOutput forward(const ModelCheckpoint& m, const Operator& op, const Matrix& x) {
  ForwardOutput out;
  out.node_embeddings = node_embeddings(m, op, x);
  if (is_graph_task(m.task)) out.graph_output = readout(m, out.node_embeddings);
  return out;
}

}  // namespace peanut
