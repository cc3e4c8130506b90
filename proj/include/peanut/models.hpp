#pragma once

#include "peanut/graph.hpp"
#include "peanut/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace peanut {

enum class Architecture { SGC, GCN, GIN, SAGE };
enum class Task { NodeClassification, GraphClassification, GraphRegression };

std::string_view to_string(Architecture arch);
std::string_view to_string(Task task);
Architecture parse_architecture(std::string_view name);
Task parse_task(std::string_view name);

inline bool is_graph_task(Task task) { return task != Task::NodeClassification; }
inline bool is_classification(Task task) { return task != Task::GraphRegression; }
/// SGC and GCN consume a weighted normalized adjacency; GIN and SAGE treat it as binary.
inline bool consumes_edge_weights(Architecture arch) {
  return arch == Architecture::SGC || arch == Architecture::GCN;
}

struct NamedMatrix {
  std::string name;
  Matrix value;
};

/// Ordered list of named weight matrices.
class WeightSet {
 public:
  void add(std::string name, Matrix value);
  Matrix& at(std::string_view name);
  const Matrix& at(std::string_view name) const;
  const Matrix* find(std::string_view name) const;

  std::vector<NamedMatrix>& entries() { return entries_; }
  const std::vector<NamedMatrix>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  Index parameter_count() const;

 private:
  std::vector<NamedMatrix> entries_;
};

WeightSet zeros_like(const WeightSet& w);

struct ModelCheckpoint {
  Architecture architecture = Architecture::GCN;
  Task task = Task::NodeClassification;
  Index input_dim = 0;
  Index hidden_dim = 16;
  std::optional<Index> num_classes;
  bool self_loops = false;
  bool uses_edge_weights = true;
  /// Seed of the train/val/test split the weights were fitted on.
  std::uint64_t split_seed = 0;
  WeightSet weights;

  /// Columns of the final output: classes, or 1 for regression.
  Index output_dim() const;
  /// Columns of the node embeddings Z.
  Index embedding_dim() const;
};

std::vector<std::string> conv_weight_names(Architecture arch);
std::vector<std::string> weight_names(Architecture arch, Task task);
Index default_hidden_dim(Task task);

/// Fresh checkpoint with weights drawn uniformly in [-sqrt(1/fan_in), sqrt(1/fan_in)].
ModelCheckpoint init_checkpoint(Architecture arch, Task task, Index input_dim, Index hidden_dim,
                                std::optional<Index> num_classes, bool self_loops,
                                std::uint64_t seed);

/// Throws on unknown/missing weights, broken shape chains, or an edge-weight
/// flag that the architecture cannot honor.
void validate_checkpoint(const ModelCheckpoint& m);

// ---------------------------------------------------------------------------
// Forward passes. `Op` is any dense or sparse Eigen matrix type.

namespace detail {

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseMax(typename Derived::Scalar(0));
}

template <typename Op>
void require_square_operator(const Op& op, Index rows) {
  require(op.rows() == op.cols(), ErrorCode::Shape, "propagation operator must be square");
  require(op.rows() == rows, ErrorCode::Shape,
          "propagation operator has " + std::to_string(op.rows()) + " rows, features have " +
              std::to_string(rows));
}

inline void require_chain(Index cols, Index rows, const char* what) {
  require(cols == rows, ErrorCode::Shape,
          std::string("shape chain broken at ") + what + ": " + std::to_string(cols) + " vs " +
              std::to_string(rows));
}

template <typename Scalar, int Options, typename StorageIndex>
bool is_binary(const Eigen::SparseMatrix<Scalar, Options, StorageIndex>& a) {
  for (Index k = 0; k < a.outerSize(); ++k)
    for (typename Eigen::SparseMatrix<Scalar, Options, StorageIndex>::InnerIterator it(a, k); it; ++it)
      if (it.value() != Scalar(0) && it.value() != Scalar(1)) return false;
  return true;
}

template <typename Derived>
bool is_binary(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  return ((a.array() == Scalar(0)) || (a.array() == Scalar(1))).all();
}

template <typename Scalar, int Options, typename StorageIndex>
VectorX<Scalar> row_sums(const Eigen::SparseMatrix<Scalar, Options, StorageIndex>& a) {
  VectorX<Scalar> d = VectorX<Scalar>::Zero(a.rows());
  for (Index k = 0; k < a.outerSize(); ++k)
    for (typename Eigen::SparseMatrix<Scalar, Options, StorageIndex>::InnerIterator it(a, k); it; ++it)
      d(it.row()) += it.value();
  return d;
}

template <typename Derived>
VectorX<typename Derived::Scalar> row_sums(const Eigen::MatrixBase<Derived>& a) {
  return a.rowwise().sum();
}

}  // namespace detail

template <typename Op>
bool is_binary_adjacency(const Op& a) {
  return detail::is_binary(a);
}

template <typename Op>
void require_binary_adjacency(const Op& a) {
  require(detail::is_binary(a), ErrorCode::NonBinaryAdjacency,
          "architecture treats the adjacency as binary but an edge weight is not in {0, 1}");
}

/// Inverse neighbor counts of a binary adjacency; zero for isolated nodes.
template <typename Op>
VectorX<typename Op::Scalar> inverse_degrees(const Op& a) {
  using Scalar = typename Op::Scalar;
  return detail::row_sums(a).unaryExpr(
      [](Scalar d) { return d > Scalar(0) ? Scalar(1) / d : Scalar(0); });
}

/// Z = S S X Theta, evaluated right to left.
template <typename Op, typename DX, typename DT>
MatrixX<typename DX::Scalar> sgc_forward(const Op& s, const Eigen::MatrixBase<DX>& x,
                                         const Eigen::MatrixBase<DT>& theta) {
  detail::require_square_operator(s, x.rows());
  detail::require_chain(x.cols(), theta.rows(), "X * Theta");
  MatrixX<typename DX::Scalar> h = x * theta;
  MatrixX<typename DX::Scalar> sh = s * h;
  return s * sh;
}

/// Z = S ReLU(S X W1) W2, no biases.
template <typename Op, typename DX, typename D1, typename D2>
MatrixX<typename DX::Scalar> gcn_forward(const Op& s, const Eigen::MatrixBase<DX>& x,
                                         const Eigen::MatrixBase<D1>& w1,
                                         const Eigen::MatrixBase<D2>& w2) {
  detail::require_square_operator(s, x.rows());
  detail::require_chain(x.cols(), w1.rows(), "X * W1");
  detail::require_chain(w1.cols(), w2.rows(), "W1 * W2");
  using Scalar = typename DX::Scalar;
  MatrixX<Scalar> sx = s * x;
  MatrixX<Scalar> h = detail::relu(sx * w1);
  MatrixX<Scalar> hw = h * w2;
  return s * hw;
}

/// GIN-0 with Linear-ReLU-Linear MLPs: Z = ReLU(Â ReLU(Â X W1) W2 W3) W4, Â = I + A.
template <typename Op, typename DX, typename D1, typename D2, typename D3, typename D4>
MatrixX<typename DX::Scalar> gin_forward(const Op& a, const Eigen::MatrixBase<DX>& x,
                                         const Eigen::MatrixBase<D1>& w1,
                                         const Eigen::MatrixBase<D2>& w2,
                                         const Eigen::MatrixBase<D3>& w3,
                                         const Eigen::MatrixBase<D4>& w4) {
  detail::require_square_operator(a, x.rows());
  require_binary_adjacency(a);
  detail::require_chain(x.cols(), w1.rows(), "X * W1");
  detail::require_chain(w1.cols(), w2.rows(), "W1 * W2");
  detail::require_chain(w2.cols(), w3.rows(), "W2 * W3");
  detail::require_chain(w3.cols(), w4.rows(), "W3 * W4");
  using Scalar = typename DX::Scalar;
  MatrixX<Scalar> q1 = a * x;
  q1 += x;
  MatrixX<Scalar> h1 = detail::relu(q1 * w1) * w2;
  MatrixX<Scalar> q2 = a * h1;
  q2 += h1;
  return detail::relu(q2 * w3) * w4;
}

/// Two mean-aggregator SAGE layers, h' = h W_self + mean_nbr(h) W_nbr, ReLU between.
template <typename Op, typename DX, typename D1, typename D2, typename D3, typename D4>
MatrixX<typename DX::Scalar> sage_forward(const Op& a, const Eigen::MatrixBase<DX>& x,
                                          const Eigen::MatrixBase<D1>& w_self1,
                                          const Eigen::MatrixBase<D2>& w_nbr1,
                                          const Eigen::MatrixBase<D3>& w_self2,
                                          const Eigen::MatrixBase<D4>& w_nbr2) {
  detail::require_square_operator(a, x.rows());
  require_binary_adjacency(a);
  detail::require_chain(x.cols(), w_self1.rows(), "X * W_self1");
  detail::require_chain(x.cols(), w_nbr1.rows(), "X * W_nbr1");
  detail::require_chain(w_self1.cols(), w_nbr1.cols(), "W_self1 | W_nbr1");
  detail::require_chain(w_self1.cols(), w_self2.rows(), "W_self1 * W_self2");
  detail::require_chain(w_self1.cols(), w_nbr2.rows(), "W_self1 * W_nbr2");
  detail::require_chain(w_self2.cols(), w_nbr2.cols(), "W_self2 | W_nbr2");
  using Scalar = typename DX::Scalar;
  const VectorX<Scalar> inv_deg = inverse_degrees(a);
  MatrixX<Scalar> mx = inv_deg.asDiagonal() * MatrixX<Scalar>(a * x);
  MatrixX<Scalar> h = detail::relu(x * w_self1 + mx * w_nbr1);
  MatrixX<Scalar> mh = inv_deg.asDiagonal() * MatrixX<Scalar>(a * h);
  return h * w_self2 + mh * w_nbr2;
}

/// Add-pooling followed by a bias-free Linear-ReLU-Linear readout.
template <typename DZ, typename D1, typename D2>
RowVectorX<typename DZ::Scalar> pool_and_readout(const Eigen::MatrixBase<DZ>& z,
                                                 const Eigen::MatrixBase<D1>& wr1,
                                                 const Eigen::MatrixBase<D2>& wr2) {
  detail::require_chain(z.cols(), wr1.rows(), "pooled * W_r1");
  detail::require_chain(wr1.cols(), wr2.rows(), "W_r1 * W_r2");
  using Scalar = typename DZ::Scalar;
  const RowVectorX<Scalar> pooled = z.colwise().sum();
  return detail::relu(pooled * wr1) * wr2;
}

// ---------------------------------------------------------------------------
// Checkpoint-level evaluation.

/// The matrix an architecture propagates with: the normalized adjacency for
/// SGC/GCN, the raw binary adjacency for GIN/SAGE.
using Operator = std::variant<Matrix, SparseMatrix>;

inline Index operator_size(const Operator& op) {
  return std::visit([](const auto& m) { return m.rows(); }, op);
}

Operator model_operator(const ModelCheckpoint& m, const Matrix& adjacency);
Operator model_operator(const ModelCheckpoint& m, const SparseMatrix& adjacency);
/// Dense when the graph has at most `dense_cap` nodes, sparse otherwise.
Operator model_operator(const ModelCheckpoint& m, const Graph& g, Index dense_cap = 4096);

struct ForwardOutput {
  Matrix node_embeddings;
  std::optional<RowVector> graph_output;
};

/// Node embeddings Z before any pooling.
Matrix node_embeddings(const ModelCheckpoint& m, const Operator& op, const Matrix& x);
ForwardOutput forward(const ModelCheckpoint& m, const Operator& op, const Matrix& x);
/// Readout of already-computed node embeddings (graph tasks only).
RowVector readout(const ModelCheckpoint& m, const Matrix& z);

}  // namespace peanut
