#include "peanut/generators.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <string>

namespace peanut {

namespace {

struct Skeleton {
  Index num_nodes = 0;
  std::vector<Edge> edges;
};

// Uniform random recursive tree plus independent extra edges.
Skeleton random_connected(Index n, double extra_edge_prob, std::mt19937_64& rng) {
  Skeleton s;
  s.num_nodes = n;
  std::vector<std::vector<bool>> linked(static_cast<std::size_t>(n),
                                        std::vector<bool>(static_cast<std::size_t>(n), false));
  for (Index i = 1; i < n; ++i) {
    std::uniform_int_distribution<Index> parent(0, i - 1);
    const Index p = parent(rng);
    s.edges.push_back({p, i, 1.0});
    linked[p][i] = true;
  }
  std::bernoulli_distribution extra(extra_edge_prob);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (!linked[i][j] && extra(rng)) s.edges.push_back({i, j, 1.0});
  return s;
}

Matrix one_hot_types(Index n, Index dim, std::mt19937_64& rng) {
  Matrix x = Matrix::Zero(n, dim);
  std::uniform_int_distribution<Index> type(0, dim - 1);
  for (Index i = 0; i < n; ++i) x(i, type(rng)) = 1.0;
  return x;
}

void check_spec(const RandomGraphSpec& spec) {
  require(spec.count >= 0, ErrorCode::InvalidArgument, "graph count must be non-negative");
  require(spec.min_nodes >= 1 && spec.max_nodes >= spec.min_nodes, ErrorCode::InvalidArgument,
          "size range must satisfy 1 <= min <= max");
  require(spec.extra_edge_prob >= 0.0 && spec.extra_edge_prob <= 1.0, ErrorCode::InvalidArgument,
          "extra-edge probability must lie in [0, 1]");
  require(spec.feature_dim >= 1, ErrorCode::InvalidArgument, "feature_dim must be positive");
}

}  // namespace

Graph generate_sbm(const SbmSpec& spec) {
  require(spec.num_nodes >= 1 && spec.blocks >= 1 && spec.blocks <= spec.num_nodes,
          ErrorCode::InvalidArgument, "SBM needs 1 <= blocks <= num_nodes");
  require(0.0 <= spec.p_out && spec.p_out <= spec.p_in && spec.p_in <= 1.0,
          ErrorCode::InvalidArgument, "SBM needs 0 <= p_out <= p_in <= 1");
  require(spec.feature_signal > 0.0, ErrorCode::InvalidArgument, "feature_signal must be positive");
  const Index n = spec.num_nodes;
  std::mt19937_64 rng(spec.seed);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i * spec.blocks / n);

  std::bernoulli_distribution within(spec.p_in);
  std::bernoulli_distribution across(spec.p_out);
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const bool same = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)];
      if (same ? within(rng) : across(rng)) edges.push_back({i, j, 1.0});
    }

  std::normal_distribution<double> noise(0.0, 1.0 / spec.feature_signal);
  Matrix x(n, spec.blocks);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < spec.blocks; ++k)
      x(i, k) = (labels[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0) + noise(rng);
  return Graph(n, std::move(edges), std::move(x), std::move(labels));
}

std::string_view to_string(TargetFn fn) {
  switch (fn) {
    case TargetFn::NodeCount: return "node-count";
    case TargetFn::EdgeCount: return "edge-count";
    case TargetFn::TriangleCount: return "triangle-count";
  }
  return "?";
}

TargetFn parse_target_fn(std::string_view name) {
  if (name == "node-count") return TargetFn::NodeCount;
  if (name == "edge-count") return TargetFn::EdgeCount;
  if (name == "triangle-count") return TargetFn::TriangleCount;
  throw Error(ErrorCode::InvalidArgument,
              "unknown target '" + std::string(name) +
                  "' (expected node-count, edge-count or triangle-count)");
}

std::vector<Graph> generate_regression_graphs(const RandomGraphSpec& spec, TargetFn target) {
  check_spec(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<Index> size(spec.min_nodes, spec.max_nodes);
  std::vector<Graph> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (Index g = 0; g < spec.count; ++g) {
    const Index n = size(rng);
    Skeleton s = random_connected(n, spec.extra_edge_prob, rng);
    Matrix x = one_hot_types(n, spec.feature_dim, rng);
    Graph graph(n, std::move(s.edges), std::move(x));
    double t = 0.0;
    switch (target) {
      case TargetFn::NodeCount: t = static_cast<double>(graph.num_nodes()); break;
      case TargetFn::EdgeCount: t = static_cast<double>(graph.num_edges()); break;
      case TargetFn::TriangleCount: t = static_cast<double>(count_triangles(graph)); break;
    }
    out.emplace_back(n, graph.edges(), graph.features(), std::nullopt, t);
  }
  return out;
}

std::vector<Graph> generate_classification_graphs(const RandomGraphSpec& spec, Index num_classes) {
  check_spec(spec);
  require(num_classes >= 2, ErrorCode::InvalidArgument, "need at least two classes");
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<Index> size(spec.min_nodes, spec.max_nodes);
  std::uniform_int_distribution<Index> klass(0, num_classes - 1);
  std::vector<Graph> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (Index g = 0; g < spec.count; ++g) {
    const Index c = klass(rng);
    const double scale = 1.0 + 2.0 * static_cast<double>(c) / static_cast<double>(num_classes - 1);
    const Index n = size(rng);
    Skeleton s = random_connected(n, std::min(1.0, spec.extra_edge_prob * scale), rng);
    Matrix x = one_hot_types(n, spec.feature_dim, rng);
    out.emplace_back(n, std::move(s.edges), std::move(x), std::nullopt, static_cast<double>(c));
  }
  return out;
}

Index count_triangles(const Graph& g) {
  // Each triangle u < v < w is counted once, from its lowest edge (u, v).
  std::vector<std::vector<Index>> higher(static_cast<std::size_t>(g.num_nodes()));
  for (const Edge& e : g.edges())
    if (e.weight != 0.0) higher[static_cast<std::size_t>(e.source)].push_back(e.target);
  for (auto& nbrs : higher) std::sort(nbrs.begin(), nbrs.end());
  Index count = 0;
  for (Index u = 0; u < g.num_nodes(); ++u) {
    const auto& nu = higher[static_cast<std::size_t>(u)];
    for (Index v : nu) {
      const auto& nv = higher[static_cast<std::size_t>(v)];
      auto a = std::upper_bound(nu.begin(), nu.end(), v);
      auto b = nv.begin();
      while (a != nu.end() && b != nv.end()) {
        if (*a < *b) {
          ++a;
        } else if (*b < *a) {
          ++b;
        } else {
          ++count;
          ++a;
          ++b;
        }
      }
    }
  }
  return count;
}

}  // namespace peanut
