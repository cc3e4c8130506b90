#pragma once

#include "peanut/types.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace peanut {

struct Edge {
  Index source = 0;
  Index target = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected attributed graph. Edges are stored once per unordered pair
/// with `source < target`, sorted lexicographically.
class Graph {
 public:
  Graph() = default;
  Graph(Index num_nodes, std::vector<Edge> edges, Matrix features,
        std::optional<std::vector<int>> node_labels = std::nullopt,
        std::optional<double> graph_target = std::nullopt);

  Index num_nodes() const { return num_nodes_; }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }
  Index feature_dim() const { return features_.cols(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& features() const { return features_; }
  const std::optional<std::vector<int>>& node_labels() const { return node_labels_; }
  const std::optional<double>& graph_target() const { return graph_target_; }

  /// 2|E| / N, the edge-count convention for average degree.
  double average_degree() const;
  bool is_binary() const;

  Matrix dense_adjacency() const;
  SparseMatrix sparse_adjacency() const;

 private:
  Index num_nodes_ = 0;
  std::vector<Edge> edges_;
  Matrix features_;
  std::optional<std::vector<int>> node_labels_;
  std::optional<double> graph_target_;
};

/// Real-to-virtual connection block of a virtual-node injection. The
/// virtual-virtual block is zero and never stored.
struct Perturbation {
  Matrix connections;  // N x n_v
  double budget = 0.0;
  bool is_discrete = false;
  bool normalized_domain = false;

  Index num_real() const { return connections.rows(); }
  Index num_virtual() const { return connections.cols(); }
  /// ||C C^T||_F, evaluated through the n_v x n_v Gram C^T C.
  double realized_budget() const;
  Index edge_count() const;
  bool empty() const { return connections.cols() == 0; }
};

Perturbation empty_perturbation(Index num_real, double budget = 0.0);

/// Base graph plus injected virtual nodes carrying all-zero features.
class PerturbedGraph {
 public:
  PerturbedGraph(Graph base, Perturbation perturbation);

  const Graph& base() const { return base_; }
  const Perturbation& perturbation() const { return perturbation_; }
  Index num_real() const { return base_.num_nodes(); }
  Index num_virtual() const { return perturbation_.num_virtual(); }
  Index num_nodes() const { return num_real() + num_virtual(); }

  Matrix features() const;
  Matrix dense_adjacency() const;
  SparseMatrix sparse_adjacency() const;

 private:
  Graph base_;
  Perturbation perturbation_;
};

namespace detail {

template <typename Scalar>
Scalar inverse_sqrt_degree(Scalar degree) {
  // Isolated (or non-positive degree) nodes get a zero row and column.
  return degree > Scalar(0) ? Scalar(1) / std::sqrt(degree) : Scalar(0);
}

}  // namespace detail

/// D^{-1/2} A D^{-1/2}, with A replaced by A + I first when requested.
template <typename Derived>
MatrixX<typename Derived::Scalar> normalize_adjacency(const Eigen::MatrixBase<Derived>& a,
                                                      bool add_self_loops) {
  using Scalar = typename Derived::Scalar;
  require(a.rows() == a.cols(), ErrorCode::Shape, "adjacency must be square");
  MatrixX<Scalar> m = a;
  if (add_self_loops) m.diagonal().array() += Scalar(1);
  const VectorX<Scalar> scale =
      m.rowwise().sum().unaryExpr([](Scalar d) { return detail::inverse_sqrt_degree(d); });
  return scale.asDiagonal() * m * scale.asDiagonal();
}

template <typename Scalar, int Options, typename StorageIndex>
Eigen::SparseMatrix<Scalar, Options, StorageIndex> normalize_adjacency(
    const Eigen::SparseMatrix<Scalar, Options, StorageIndex>& a, bool add_self_loops) {
  require(a.rows() == a.cols(), ErrorCode::Shape, "adjacency must be square");
  Eigen::SparseMatrix<Scalar, Options, StorageIndex> m = a;
  if (add_self_loops) {
    Eigen::SparseMatrix<Scalar, Options, StorageIndex> eye(a.rows(), a.cols());
    eye.setIdentity();
    m = m + eye;
  }
  VectorX<Scalar> degree = VectorX<Scalar>::Zero(m.rows());
  for (Index k = 0; k < m.outerSize(); ++k)
    for (typename Eigen::SparseMatrix<Scalar, Options, StorageIndex>::InnerIterator it(m, k); it; ++it)
      degree(it.row()) += it.value();
  const VectorX<Scalar> scale =
      degree.unaryExpr([](Scalar d) { return detail::inverse_sqrt_degree(d); });
  return scale.asDiagonal() * m * scale.asDiagonal();
}

Matrix normalized_adjacency(const Graph& g, bool add_self_loops = false);
SparseMatrix normalized_adjacency_sparse(const Graph& g, bool add_self_loops = false);

/// [[base, C], [C^T, 0]].
template <typename DerivedA, typename DerivedC>
MatrixX<typename DerivedA::Scalar> build_perturbed_adjacency(
    const Eigen::MatrixBase<DerivedA>& base, const Eigen::MatrixBase<DerivedC>& connections) {
  using Scalar = typename DerivedA::Scalar;
  require(base.rows() == base.cols(), ErrorCode::Shape, "base adjacency must be square");
  require(connections.rows() == base.rows(), ErrorCode::Shape,
          "perturbation rows must equal the number of real nodes");
  const Index n = base.rows();
  const Index nv = connections.cols();
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(n + nv, n + nv);
  out.topLeftCorner(n, n) = base;
  out.topRightCorner(n, nv) = connections;
  out.bottomLeftCorner(nv, n) = connections.transpose();
  return out;
}

Matrix build_perturbed_adjacency(const Matrix& base, const Perturbation& p);
SparseMatrix build_perturbed_adjacency(const SparseMatrix& base, const Perturbation& p);

/// Top `n` rows; the real-node slice of a perturbed-graph output.
template <typename Derived>
MatrixX<typename Derived::Scalar> real_node_rows(const Eigen::MatrixBase<Derived>& m, Index n) {
  require(n >= 0 && n <= m.rows(), ErrorCode::Shape,
          "requested " + std::to_string(n) + " real rows from a matrix with " +
              std::to_string(m.rows()) + " rows");
  return m.topRows(n);
}

/// Zero-padded feature matrix [X; 0] for `num_virtual` injected nodes.
template <typename Derived>
MatrixX<typename Derived::Scalar> pad_virtual_features(const Eigen::MatrixBase<Derived>& x,
                                                       Index num_virtual) {
  MatrixX<typename Derived::Scalar> out =
      MatrixX<typename Derived::Scalar>::Zero(x.rows() + num_virtual, x.cols());
  out.topRows(x.rows()) = x;
  return out;
}

}  // namespace peanut
