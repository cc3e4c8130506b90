#include "peanut/graph.hpp"

#include <algorithm>
#include <set>
#include <utility>

namespace peanut {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Shape: return "shape";
    case ErrorCode::InvalidGraph: return "invalid-graph";
    case ErrorCode::MalformedJson: return "malformed-json";
    case ErrorCode::AsymmetricWeights: return "asymmetric-weights";
    case ErrorCode::FeatureShape: return "feature-shape";
    case ErrorCode::DegenerateEmbedding: return "degenerate-embedding";
    case ErrorCode::NonBinaryAdjacency: return "non-binary-adjacency";
    case ErrorCode::UnknownArchitecture: return "unknown-architecture";
    case ErrorCode::MissingWeight: return "missing-weight";
    case ErrorCode::EmptyInput: return "empty-input";
    case ErrorCode::NonFiniteLoss: return "non-finite-loss";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

Graph::Graph(Index num_nodes, std::vector<Edge> edges, Matrix features,
             std::optional<std::vector<int>> node_labels, std::optional<double> graph_target)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      features_(std::move(features)),
      node_labels_(std::move(node_labels)),
      graph_target_(graph_target) {
  require(num_nodes_ >= 0, ErrorCode::InvalidGraph, "negative node count");
  require(features_.rows() == num_nodes_, ErrorCode::FeatureShape,
          "feature matrix has " + std::to_string(features_.rows()) + " rows, expected " +
              std::to_string(num_nodes_));
  require(features_.allFinite(), ErrorCode::InvalidGraph, "non-finite feature entry");
  if (node_labels_) {
    require(static_cast<Index>(node_labels_->size()) == num_nodes_, ErrorCode::InvalidGraph,
            "label count does not match node count");
    for (int label : *node_labels_)
      require(label >= 0, ErrorCode::InvalidGraph, "negative class label");
  }
  if (graph_target_)
    require(std::isfinite(*graph_target_), ErrorCode::InvalidGraph, "non-finite graph target");

  for (Edge& e : edges_) {
    require(e.source >= 0 && e.source < num_nodes_ && e.target >= 0 && e.target < num_nodes_,
            ErrorCode::InvalidGraph, "edge endpoint out of range");
    require(e.source != e.target, ErrorCode::InvalidGraph,
            "self-loop on node " + std::to_string(e.source));
    require(std::isfinite(e.weight) && e.weight >= 0.0, ErrorCode::InvalidGraph,
            "edge weights must be finite and non-negative");
    if (e.source > e.target) std::swap(e.source, e.target);
  }
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return std::pair(a.source, a.target) < std::pair(b.source, b.target);
  });
  const auto dup = std::adjacent_find(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.source == b.source && a.target == b.target;
  });
  require(dup == edges_.end(), ErrorCode::InvalidGraph,
          dup == edges_.end() ? std::string()
                              : "duplicate edge (" + std::to_string(dup->source) + ", " +
                                    std::to_string(dup->target) + ")");
}

double Graph::average_degree() const {
  if (num_nodes_ == 0) return 0.0;
  return 2.0 * static_cast<double>(edges_.size()) / static_cast<double>(num_nodes_);
}

bool Graph::is_binary() const {
  return std::all_of(edges_.begin(), edges_.end(),
                     [](const Edge& e) { return e.weight == 0.0 || e.weight == 1.0; });
}

Matrix Graph::dense_adjacency() const {
  Matrix a = Matrix::Zero(num_nodes_, num_nodes_);
  for (const Edge& e : edges_) {
    a(e.source, e.target) = e.weight;
    a(e.target, e.source) = e.weight;
  }
  return a;
}

SparseMatrix Graph::sparse_adjacency() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * edges_.size());
  for (const Edge& e : edges_) {
    triplets.emplace_back(e.source, e.target, e.weight);
    triplets.emplace_back(e.target, e.source, e.weight);
  }
  SparseMatrix a(num_nodes_, num_nodes_);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

double Perturbation::realized_budget() const {
  if (connections.size() == 0) return 0.0;
  return (connections.transpose() * connections).norm();
}

Index Perturbation::edge_count() const {
  return static_cast<Index>((connections.array() != 0.0).count());
}

Perturbation empty_perturbation(Index num_real, double budget) {
  Perturbation p;
  p.connections = Matrix::Zero(num_real, 0);
  p.budget = budget;
  return p;
}

PerturbedGraph::PerturbedGraph(Graph base, Perturbation perturbation)
    : base_(std::move(base)), perturbation_(std::move(perturbation)) {
  require(perturbation_.num_real() == base_.num_nodes(), ErrorCode::Shape,
          "perturbation has " + std::to_string(perturbation_.num_real()) +
              " rows but the graph has " + std::to_string(base_.num_nodes()) + " nodes");
}

Matrix PerturbedGraph::features() const {
  return pad_virtual_features(base_.features(), num_virtual());
}

Matrix PerturbedGraph::dense_adjacency() const {
  return build_perturbed_adjacency(base_.dense_adjacency(), perturbation_);
}

SparseMatrix PerturbedGraph::sparse_adjacency() const {
  return build_perturbed_adjacency(base_.sparse_adjacency(), perturbation_);
}

Matrix normalized_adjacency(const Graph& g, bool add_self_loops) {
  return normalize_adjacency(g.dense_adjacency(), add_self_loops);
}

SparseMatrix normalized_adjacency_sparse(const Graph& g, bool add_self_loops) {
  return normalize_adjacency(g.sparse_adjacency(), add_self_loops);
}

Matrix build_perturbed_adjacency(const Matrix& base, const Perturbation& p) {
  return build_perturbed_adjacency(base, p.connections);
}

SparseMatrix build_perturbed_adjacency(const SparseMatrix& base, const Perturbation& p) {
  require(base.rows() == base.cols(), ErrorCode::Shape, "base adjacency must be square");
  require(p.num_real() == base.rows(), ErrorCode::Shape,
          "perturbation rows must equal the number of real nodes");
  const Index n = base.rows();
  const Index nv = p.num_virtual();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(base.nonZeros() + 2 * p.edge_count()));
  for (Index k = 0; k < base.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(base, k); it; ++it)
      triplets.emplace_back(it.row(), it.col(), it.value());
  for (Index j = 0; j < nv; ++j)
    for (Index i = 0; i < n; ++i) {
      const double w = p.connections(i, j);
      if (w == 0.0) continue;
      triplets.emplace_back(i, n + j, w);
      triplets.emplace_back(n + j, i, w);
    }
  SparseMatrix out(n + nv, n + nv);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

}  // namespace peanut
