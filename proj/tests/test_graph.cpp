#include "oracles.hpp"
#include "peanut/graph.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace peanut;

namespace {

Graph path2() { return Graph(2, {{0, 1, 1.0}}, Matrix::Ones(2, 1)); }

Graph random_graph(Index n, double p, std::uint64_t seed, bool weighted = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (unit(rng) < p) edges.push_back({i, j, weighted ? 0.1 + unit(rng) : 1.0});
  return Graph(n, edges, oracle::gaussian(n, 3, rng));
}

template <typename F>
void expect_code(F&& f, ErrorCode code) {
  try {
    f();
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Normalize, PathIsItsOwnNormalization) {
  const Graph g = path2();
  EXPECT_EQ(normalized_adjacency(g), g.dense_adjacency());
}

TEST(Normalize, TriangleHalvesAdjacency) {
  const Graph g(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}}, Matrix::Zero(3, 1));
  EXPECT_TRUE(normalized_adjacency(g).isApprox(g.dense_adjacency() / 2.0, 1e-15));
}

TEST(Normalize, StarCouplesCenterOnly) {
  const Graph g(3, {{0, 1, 1}, {0, 2, 1}}, Matrix::Zero(3, 1));
  const Matrix s = normalized_adjacency(g);
  EXPECT_NEAR(s(0, 1), 0.70711, 1e-5);
  EXPECT_NEAR(s(0, 2), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s(1, 2), 0.0);
  EXPECT_EQ(s(1, 1), 0.0);
}

TEST(Normalize, IsolatedNodeGetsZeroRow) {
  const Graph g(3, {{0, 1, 1}}, Matrix::Zero(3, 1));
  const Matrix s = normalized_adjacency(g);
  EXPECT_TRUE(s.row(2).isZero(0));
  EXPECT_TRUE(s.col(2).isZero(0));
  EXPECT_TRUE(s.allFinite());
}

TEST(Normalize, MatchesLoopOracleDenseAndSparse) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = random_graph(9, 0.3, seed, seed % 2 == 1);
    for (bool loops : {false, true}) {
      const Matrix want = oracle::normalized(g.dense_adjacency(), loops);
      EXPECT_LE((normalized_adjacency(g, loops) - want).cwiseAbs().maxCoeff(), 1e-14);
      EXPECT_LE((Matrix(normalized_adjacency_sparse(g, loops)) - want).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(GraphValidation, RejectsSelfLoopNegativeWeightAndBadRows) {
  expect_code([] { Graph(2, {{1, 1, 1.0}}, Matrix::Zero(2, 1)); }, ErrorCode::InvalidGraph);
  expect_code([] { Graph(2, {{0, 1, -1.0}}, Matrix::Zero(2, 1)); }, ErrorCode::InvalidGraph);
  expect_code([] { Graph(2, {{0, 5, 1.0}}, Matrix::Zero(2, 1)); }, ErrorCode::InvalidGraph);
  expect_code([] { Graph(3, {{0, 1, 1.0}}, Matrix::Zero(2, 1)); }, ErrorCode::FeatureShape);
}

TEST(GraphValidation, EdgesCanonicalizedAndSymmetric) {
  const Graph g(3, {{2, 0, 0.5}, {1, 0, 1.0}}, Matrix::Zero(3, 1));
  ASSERT_EQ(g.num_edges(), 2);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1, 1.0}));
  EXPECT_EQ(g.edges()[1], (Edge{0, 2, 0.5}));
  const Matrix a = g.dense_adjacency();
  EXPECT_EQ((a - a.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(g.average_degree(), 4.0 / 3.0);
  EXPECT_FALSE(g.is_binary());
}

TEST(Perturbed, EmptyPerturbationReturnsBase) {
  const Graph g = random_graph(5, 0.5, 3);
  const Matrix a = g.dense_adjacency();
  EXPECT_EQ(build_perturbed_adjacency(a, empty_perturbation(5)), a);
}

TEST(Perturbed, PathWithOneVirtualNode) {
  Perturbation p;
  p.connections = Matrix(2, 1);
  p.connections << 1, 0;
  const Matrix out = build_perturbed_adjacency(path2().dense_adjacency(), p);
  Matrix want(3, 3);
  want << 0, 1, 1, 1, 0, 0, 1, 0, 0;
  EXPECT_EQ(out, want);
}

TEST(Perturbed, RandomBlockIsSymmetricWithZeroVirtualBlock) {
  std::mt19937_64 rng(11);
  Matrix base = oracle::gaussian(4, 4, rng);
  base = (base + base.transpose()).eval();
  Perturbation p;
  p.connections = oracle::gaussian(4, 2, rng);
  const Matrix out = build_perturbed_adjacency(base, p);
  EXPECT_EQ((out - out.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(out.bottomRightCorner(2, 2).isZero(0));
  EXPECT_EQ(out, oracle::block(base, p.connections));
  EXPECT_EQ(real_node_rows(out, 4).leftCols(4), base);
}

TEST(Perturbed, SparseAgreesWithDense) {
  const Graph g = random_graph(6, 0.4, 5, true);
  std::mt19937_64 rng(2);
  Perturbation p;
  p.connections = oracle::gaussian(6, 3, rng);
  EXPECT_EQ(Matrix(build_perturbed_adjacency(g.sparse_adjacency(), p)),
            build_perturbed_adjacency(g.dense_adjacency(), p));
}

TEST(Perturbed, ShapeMismatchRejected) {
  Perturbation p;
  p.connections = Matrix::Ones(3, 1);
  expect_code([&] { build_perturbed_adjacency(path2().dense_adjacency(), p); }, ErrorCode::Shape);
}

TEST(Perturbed, GraphFeaturesArePaddedWithZeros) {
  const Graph g = random_graph(4, 0.5, 8);
  Perturbation p;
  p.connections = Matrix::Ones(4, 3);
  const PerturbedGraph pg(g, p);
  EXPECT_EQ(pg.num_nodes(), 7);
  const Matrix x = pg.features();
  EXPECT_EQ(x.topRows(4), g.features());
  EXPECT_TRUE(x.bottomRows(3).isZero(0));
  EXPECT_EQ(pad_virtual_features(g.features(), 3), x);
}

TEST(RealRows, Slices) {
  Matrix m(5, 2);
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  EXPECT_EQ(real_node_rows(m.topRows(3), 3), m.topRows(3));
  EXPECT_EQ(real_node_rows(m, 3), m.topRows(3));
  const Matrix none = real_node_rows(m, 0);
  EXPECT_EQ(none.rows(), 0);
  EXPECT_EQ(none.cols(), 2);
  expect_code([&] { real_node_rows(m, 6); }, ErrorCode::Shape);
}

TEST(PerturbationBudget, RealizedBudgetMatchesOracle) {
  std::mt19937_64 rng(4);
  Perturbation p;
  p.connections = oracle::gaussian(7, 3, rng);
  const double want = oracle::frobenius(oracle::matmul(p.connections, oracle::transpose(p.connections)));
  EXPECT_NEAR(p.realized_budget(), want, 1e-12 * want);
}
