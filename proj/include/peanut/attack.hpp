#pragma once

#include "peanut/graph.hpp"
#include "peanut/linalg.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace peanut {

enum class Variant { PeanutW, Peanut, PeanutU, PeanutD, Rand, RandD };
enum class VMode { UniformRandom, Ones };

std::string_view to_string(Variant v);
std::string_view to_string(VMode m);
/// Throws InvalidArgument naming every accepted variant.
Variant parse_variant(std::string_view name);
VMode parse_v_mode(std::string_view name);
const std::vector<std::string>& variant_names();

inline bool is_discrete(Variant v) { return v == Variant::PeanutD || v == Variant::RandD; }
inline bool is_random(Variant v) { return v == Variant::Rand || v == Variant::RandD; }

struct Budget {
  Index num_virtual = 0;
  double delta = 0.0;
};

struct AttackConfig {
  Variant variant = Variant::Peanut;
  double ratio = 0.05;
  /// Overrides floor(r N) for node tasks; required for graph-level tasks.
  std::optional<Index> num_virtual;
  /// Overrides the computed delta (node tasks); used to budget-match baselines.
  std::optional<double> delta;
  VMode v_mode = VMode::UniformRandom;
  std::uint64_t seed = 0;
  /// Inject into the normalized adjacency S instead of A.
  bool normalized_domain = false;
  /// Attacker observes log-probabilities instead of logits (node tasks).
  bool observe_log_probs = false;
  /// Average degree for the node-task budget; defaults to 2|E|/N.
  std::optional<double> average_degree;
  PowerIterationOptions eigen;
};

/// n_v = floor(r N), delta = floor(r N deg).
Budget budget_node_task(Index num_nodes, double average_degree, double ratio);
/// delta = floor(r |E|).
double budget_graph_task(Index num_edges, double ratio);

/// Flips u so that it has at least as many positive as negative entries.
Vector sign_align(const Vector& u);

/// Unit-norm mixing vector over the virtual nodes.
Vector make_v(Index num_virtual, VMode mode, std::uint64_t seed);

struct PeanutSolution {
  /// sqrt(delta) u v^T, sign-aligned and unclipped.
  Perturbation perturbation;
  /// u v^T; carries the ranking used by the discrete variants when delta is tiny.
  Matrix direction;
  double eigenvalue = 0.0;
  Index iterations = 0;
  bool converged = false;
};

/// Rank-one budget-saturating maximizer of ||S_v S_v^T Z||_F^2 subject to
/// ||S_v S_v^T||_F <= delta: S_v = sqrt(delta) u1 v^T with u1 the dominant
/// eigenvector of Z Z^T.
PeanutSolution peanut_core(const Matrix& z, const Budget& budget, VMode v_mode, std::uint64_t seed,
                           const PowerIterationOptions& eigen = {});

/// White-box variant for SGC: the same construction on H = X Theta.
PeanutSolution attack_white_box_sgc(const Matrix& x, const Matrix& theta, const Budget& budget,
                                    VMode v_mode, std::uint64_t seed,
                                    const PowerIterationOptions& eigen = {});

/// Entries uniform in [0, 1], rescaled so that ||A_v A_v^T||_F = delta.
Perturbation random_baseline(Index num_real, const Budget& budget, std::uint64_t seed);

/// k = max(round(delta / n_v), 1), rounding half away from zero.
Index discrete_edges_per_node(const Budget& budget);

/// Post-processing per variant: identity for PEANUT-W/PEANUT-U/RAND, ReLU for
/// PEANUT, top-k binarization per column for PEANUT-D/RAND-D (ties to the lowest row).
Perturbation apply_variant(const Perturbation& raw, Variant variant, const Budget& budget);

/// ||C C^T M||_F^2, evaluated as C (C^T M).
double perturbation_objective(const Matrix& connections, const Matrix& m);

}  // namespace peanut
