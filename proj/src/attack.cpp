#include "peanut/attack.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

namespace peanut {

namespace {

// Products like 0.29 * 100 land a few ulps below the integer they denote.
double floor_budget(double x) { return std::floor(x + 1e-9 * std::max(1.0, std::abs(x))); }

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

Perturbation scaled_direction(const Matrix& direction, double delta) {
  Perturbation p;
  p.connections = std::sqrt(delta) * direction;
  p.budget = delta;
  return p;
}

PeanutSolution solve_rank_one(const Matrix& embedding, const Budget& budget, VMode v_mode,
                              std::uint64_t seed, const PowerIterationOptions& eigen) {
  require(budget.delta >= 0.0 && budget.num_virtual >= 0, ErrorCode::InvalidArgument,
          "budget must be non-negative");
  PeanutSolution out;
  const Index n = embedding.rows();
  if (budget.num_virtual == 0) {
    out.direction = Matrix::Zero(n, 0);
    out.perturbation = empty_perturbation(n, budget.delta);
    out.converged = true;
    return out;
  }
  if (!(embedding.array() != 0.0).any())
    throw Error(ErrorCode::DegenerateEmbedding,
                "no attack direction: the observed embedding is all zero");
  const EigenResult<double> eig = dominant_eigenvector_gram(embedding, eigen);
  const Vector u = sign_align(eig.vector);
  const Vector v = make_v(budget.num_virtual, v_mode, seed);
  out.direction = u * v.transpose();
  out.perturbation = scaled_direction(out.direction, budget.delta);
  out.eigenvalue = eig.value;
  out.iterations = eig.iterations;
  out.converged = eig.converged;
  return out;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::PeanutW: return "PEANUT-W";
    case Variant::Peanut: return "PEANUT";
    case Variant::PeanutU: return "PEANUT-U";
    case Variant::PeanutD: return "PEANUT-D";
    case Variant::Rand: return "RAND";
    case Variant::RandD: return "RAND-D";
  }
  return "?";
}

std::string_view to_string(VMode m) {
  return m == VMode::Ones ? "ones" : "uniform-random";
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"PEANUT-W", "PEANUT", "PEANUT-U",
                                              "PEANUT-D", "RAND",   "RAND-D"};
  return names;
}

Variant parse_variant(std::string_view name) {
  const std::string u = upper(name);
  for (Variant v : {Variant::PeanutW, Variant::Peanut, Variant::PeanutU, Variant::PeanutD,
                    Variant::Rand, Variant::RandD})
    if (u == to_string(v)) return v;
  std::string msg = "unknown variant '" + std::string(name) + "'; expected one of {";
  for (std::size_t i = 0; i < variant_names().size(); ++i)
    msg += (i ? ", " : "") + variant_names()[i];
  throw Error(ErrorCode::InvalidArgument, msg + "}");
}

VMode parse_v_mode(std::string_view name) {
  const std::string u = upper(name);
  if (u == "ONES") return VMode::Ones;
  if (u == "UNIFORM" || u == "UNIFORM-RANDOM") return VMode::UniformRandom;
  throw Error(ErrorCode::InvalidArgument,
              "unknown v-mode '" + std::string(name) + "'; expected uniform-random or ones");
}

Budget budget_node_task(Index num_nodes, double average_degree, double ratio) {
  require(num_nodes >= 1, ErrorCode::InvalidArgument, "node budget needs N >= 1");
  require(ratio >= 0.0 && average_degree >= 0.0, ErrorCode::InvalidArgument,
          "budget ratio and average degree must be non-negative");
  const double rn = ratio * static_cast<double>(num_nodes);
  return {static_cast<Index>(floor_budget(rn)), floor_budget(rn * average_degree)};
}

double budget_graph_task(Index num_edges, double ratio) {
  require(ratio >= 0.0 && num_edges >= 0, ErrorCode::InvalidArgument,
          "budget ratio and edge count must be non-negative");
  return floor_budget(ratio * static_cast<double>(num_edges));
}

Vector sign_align(const Vector& u) {
  double balance = 0.0;
  for (Index i = 0; i < u.size(); ++i) balance += (u(i) > 0.0) - (u(i) < 0.0);
  return balance >= 0.0 ? u : Vector(-u);
}

Vector make_v(Index num_virtual, VMode mode, std::uint64_t seed) {
  require(num_virtual >= 1, ErrorCode::InvalidArgument, "make_v needs at least one virtual node");
  if (mode == VMode::Ones)
    return Vector::Constant(num_virtual, 1.0 / std::sqrt(static_cast<double>(num_virtual)));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector v(num_virtual);
  for (Index i = 0; i < num_virtual; ++i) {
    double x = 0.0;
    while (x == 0.0) x = unit(rng);
    v(i) = x;
  }
  return v / v.norm();
}

PeanutSolution peanut_core(const Matrix& z, const Budget& budget, VMode v_mode, std::uint64_t seed,
                           const PowerIterationOptions& eigen) {
  return solve_rank_one(z, budget, v_mode, seed, eigen);
}

PeanutSolution attack_white_box_sgc(const Matrix& x, const Matrix& theta, const Budget& budget,
                                    VMode v_mode, std::uint64_t seed,
                                    const PowerIterationOptions& eigen) {
  require(x.cols() == theta.rows(), ErrorCode::Shape, "X and Theta do not chain");
  return solve_rank_one(x * theta, budget, v_mode, seed, eigen);
}

Perturbation random_baseline(Index num_real, const Budget& budget, std::uint64_t seed) {
  require(budget.delta >= 0.0 && budget.num_virtual >= 0, ErrorCode::InvalidArgument,
          "budget must be non-negative");
  Perturbation p;
  p.budget = budget.delta;
  p.connections = Matrix::Zero(num_real, budget.num_virtual);
  if (budget.delta == 0.0 || budget.num_virtual == 0 || num_real == 0) return p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index j = 0; j < p.connections.cols(); ++j)
    for (Index i = 0; i < p.connections.rows(); ++i) p.connections(i, j) = unit(rng);
  const double gram = gram_frobenius_norm(p.connections);
  if (gram > 0.0) p.connections *= std::sqrt(budget.delta / gram);
  return p;
}

Index discrete_edges_per_node(const Budget& budget) {
  if (budget.num_virtual == 0) return 0;
  const double k = std::round(budget.delta / static_cast<double>(budget.num_virtual));
  return std::max<Index>(static_cast<Index>(k), 1);
}

Perturbation apply_variant(const Perturbation& raw, Variant variant, const Budget& budget) {
  Perturbation out = raw;
  out.budget = budget.delta;
  switch (variant) {
    case Variant::PeanutW:
    case Variant::PeanutU:
    case Variant::Rand:
      return out;
    case Variant::Peanut:
      out.connections = raw.connections.cwiseMax(0.0);
      return out;
    case Variant::PeanutD:
    case Variant::RandD: {
      const Index n = raw.num_real();
      const Index k = std::min(discrete_edges_per_node(budget), n);
      out.connections = Matrix::Zero(n, raw.num_virtual());
      out.is_discrete = true;
      std::vector<Index> order(static_cast<std::size_t>(n));
      for (Index j = 0; j < raw.num_virtual(); ++j) {
        std::iota(order.begin(), order.end(), Index{0});
        const auto col = raw.connections.col(j);
        std::stable_sort(order.begin(), order.end(),
                         [&](Index a, Index b) { return col(a) > col(b); });
        for (Index r = 0; r < k; ++r) out.connections(order[static_cast<std::size_t>(r)], j) = 1.0;
      }
      return out;
    }
  }
  return out;
}

double perturbation_objective(const Matrix& connections, const Matrix& m) {
  require(connections.rows() == m.rows(), ErrorCode::Shape,
          "perturbation and matrix row counts differ");
  return (connections * (connections.transpose() * m)).squaredNorm();
}

}  // namespace peanut
