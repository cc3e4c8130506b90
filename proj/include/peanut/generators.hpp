#pragma once

#include "peanut/graph.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace peanut {

struct SbmSpec {
  Index num_nodes = 400;
  Index blocks = 2;
  double p_in = 0.05;
  double p_out = 0.005;
  /// Block-indicator features carry Gaussian noise with standard deviation 1 / feature_signal.
  double feature_signal = 1.0;
  std::uint64_t seed = 0;
};

/// Stochastic block model with contiguous equal-size blocks; labels are block ids.
Graph generate_sbm(const SbmSpec& spec);

enum class TargetFn { NodeCount, EdgeCount, TriangleCount };

std::string_view to_string(TargetFn fn);
TargetFn parse_target_fn(std::string_view name);

struct RandomGraphSpec {
  Index count = 200;
  Index min_nodes = 10;
  Index max_nodes = 30;
  /// Probability of each non-tree edge on top of a uniform random tree.
  double extra_edge_prob = 0.1;
  /// Width of the one-hot node-type features.
  Index feature_dim = 3;
  std::uint64_t seed = 0;
};

/// Random connected graphs whose target is the named graph statistic.
std::vector<Graph> generate_regression_graphs(const RandomGraphSpec& spec, TargetFn target);

/// Random connected graphs labeled by class; class c draws extra edges with a
/// probability that grows linearly from `extra_edge_prob` to 3x that value.
std::vector<Graph> generate_classification_graphs(const RandomGraphSpec& spec, Index num_classes);

Index count_triangles(const Graph& g);

}  // namespace peanut
