#include "gradcheck.hpp"
#include "oracles.hpp"
#include "peanut/generators.hpp"
#include "peanut/metrics.hpp"
#include "peanut/models.hpp"
#include "peanut/train.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace peanut;

namespace {

Matrix random_adjacency(Index n, double p, std::mt19937_64& rng) {
  return gradcheck::random_binary_graph(n, p, 1, rng).dense_adjacency();
}

Matrix permutation(Index n, std::mt19937_64& rng) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  Matrix p = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) p(i, order[static_cast<std::size_t>(i)]) = 1;
  return p;
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST(Sgc, IdentityPropagation) {
  std::mt19937_64 rng(1);
  const Matrix x = oracle::gaussian(4, 3, rng), theta = oracle::gaussian(3, 2, rng);
  EXPECT_LE(max_abs(sgc_forward(Matrix::Identity(4, 4), x, theta) - x * theta), 1e-15);
}

TEST(Sgc, PathInvolution) {
  Matrix s(2, 2);
  s << 0, 1, 1, 0;
  EXPECT_EQ(sgc_forward(s, Matrix::Identity(2, 2), Matrix::Identity(2, 2)), Matrix::Identity(2, 2));
}

TEST(Sgc, MatchesNaiveOracleDenseAndSparse) {
  std::mt19937_64 rng(2);
  const Matrix s = oracle::normalized(random_adjacency(5, 0.5, rng), false);
  const Matrix x = oracle::gaussian(5, 4, rng), theta = oracle::gaussian(4, 3, rng);
  const Matrix want = oracle::sgc(s, x, theta);
  EXPECT_LE(max_abs(sgc_forward(s, x, theta) - want), 1e-12);
  const SparseMatrix sp = s.sparseView();
  EXPECT_LE(max_abs(sgc_forward(sp, x, theta) - want), 1e-12);
}

TEST(Gcn, ZeroOperatorGivesZero) {
  std::mt19937_64 rng(3);
  const Matrix x = oracle::gaussian(4, 3, rng);
  EXPECT_TRUE(gcn_forward(Matrix::Zero(4, 4), x, oracle::gaussian(3, 5, rng),
                          oracle::gaussian(5, 2, rng)).isZero(0));
}

TEST(Gcn, ReluAnnihilation) {
  const Matrix x = -Matrix::Ones(4, 3);
  const Matrix w1 = Matrix::Ones(3, 5);  // XW1 < 0 everywhere
  std::mt19937_64 rng(4);
  EXPECT_TRUE(gcn_forward(Matrix::Identity(4, 4), x, w1, oracle::gaussian(5, 2, rng)).isZero(0));
}

TEST(Gcn, MatchesNaiveOracle) {
  std::mt19937_64 rng(5);
  const Matrix s = oracle::normalized(random_adjacency(7, 0.4, rng), true);
  const Matrix x = oracle::gaussian(7, 4, rng), w1 = oracle::gaussian(4, 6, rng),
               w2 = oracle::gaussian(6, 3, rng);
  EXPECT_LE(max_abs(gcn_forward(s, x, w1, w2) - oracle::gcn(s, x, w1, w2)), 1e-12);
}

TEST(Gin, EdgelessGraphIsMlpChain) {
  std::mt19937_64 rng(6);
  const Matrix x = oracle::gaussian(5, 3, rng), w1 = oracle::gaussian(3, 4, rng),
               w2 = oracle::gaussian(4, 4, rng), w3 = oracle::gaussian(4, 4, rng),
               w4 = oracle::gaussian(4, 2, rng);
  const Matrix want = oracle::relu(oracle::relu(x * w1) * w2 * w3) * w4;
  EXPECT_LE(max_abs(gin_forward(Matrix::Zero(5, 5), x, w1, w2, w3, w4) - want), 1e-12);
}

TEST(Gin, ZeroFeaturesGiveZero) {
  std::mt19937_64 rng(7);
  const Matrix a = random_adjacency(5, 0.5, rng);
  EXPECT_TRUE(gin_forward(a, Matrix::Zero(5, 3), oracle::gaussian(3, 4, rng),
                          oracle::gaussian(4, 4, rng), oracle::gaussian(4, 4, rng),
                          oracle::gaussian(4, 2, rng)).isZero(0));
}

TEST(Gin, MatchesNaiveOracle) {
  std::mt19937_64 rng(8);
  const Matrix a = random_adjacency(8, 0.4, rng);
  const Matrix x = oracle::gaussian(8, 3, rng), w1 = oracle::gaussian(3, 5, rng),
               w2 = oracle::gaussian(5, 5, rng), w3 = oracle::gaussian(5, 5, rng),
               w4 = oracle::gaussian(5, 2, rng);
  const Matrix want = oracle::gin(a, x, w1, w2, w3, w4);
  EXPECT_LE(max_abs(gin_forward(a, x, w1, w2, w3, w4) - want), 1e-12);
  const SparseMatrix sp = a.sparseView();
  EXPECT_LE(max_abs(gin_forward(sp, x, w1, w2, w3, w4) - want), 1e-12);
}

TEST(BinaryArchitectures, RejectWeightedAdjacency) {
  std::mt19937_64 rng(9);
  const Matrix a = 0.5 * random_adjacency(5, 0.6, rng);
  const Matrix x = oracle::gaussian(5, 2, rng), w = Matrix::Ones(2, 2);
  for (auto f : {+[](const Matrix& a, const Matrix& x, const Matrix& w) {
                   return gin_forward(a, x, w, w, w, w);
                 },
                 +[](const Matrix& a, const Matrix& x, const Matrix& w) {
                   return sage_forward(a, x, w, w, w, w);
                 }}) {
    try {
      f(a, x, w);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NonBinaryAdjacency);
    }
  }
}

TEST(Sage, EdgelessGraphUsesSelfWeightsOnly) {
  std::mt19937_64 rng(10);
  const Matrix x = oracle::gaussian(4, 3, rng), ws1 = oracle::gaussian(3, 5, rng),
               wn1 = oracle::gaussian(3, 5, rng), ws2 = oracle::gaussian(5, 2, rng),
               wn2 = oracle::gaussian(5, 2, rng);
  const Matrix want = oracle::relu(x * ws1) * ws2;
  EXPECT_LE(max_abs(sage_forward(Matrix::Zero(4, 4), x, ws1, wn1, ws2, wn2) - want), 1e-12);
}

TEST(Sage, SymmetricPathSumsWeights) {
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  std::mt19937_64 rng(11);
  const Matrix row = oracle::gaussian(1, 3, rng);
  const Matrix x = row.replicate(2, 1);
  const Matrix ws1 = oracle::gaussian(3, 4, rng), wn1 = oracle::gaussian(3, 4, rng),
               ws2 = oracle::gaussian(4, 2, rng), wn2 = oracle::gaussian(4, 2, rng);
  const Matrix want = oracle::relu(x * (ws1 + wn1)) * (ws2 + wn2);
  EXPECT_LE(max_abs(sage_forward(a, x, ws1, wn1, ws2, wn2) - want), 1e-12);
}

TEST(Sage, MatchesNaiveOracle) {
  std::mt19937_64 rng(12);
  const Matrix a = random_adjacency(9, 0.3, rng);
  const Matrix x = oracle::gaussian(9, 3, rng), ws1 = oracle::gaussian(3, 5, rng),
               wn1 = oracle::gaussian(3, 5, rng), ws2 = oracle::gaussian(5, 2, rng),
               wn2 = oracle::gaussian(5, 2, rng);
  EXPECT_LE(max_abs(sage_forward(a, x, ws1, wn1, ws2, wn2) - oracle::sage(a, x, ws1, wn1, ws2, wn2)),
            1e-12);
}

TEST(Readout, Examples) {
  std::mt19937_64 rng(13);
  const Matrix r1 = oracle::gaussian(3, 4, rng), r2 = oracle::gaussian(4, 2, rng);
  EXPECT_TRUE(pool_and_readout(Matrix::Zero(5, 3), r1, r2).isZero(0));
  const Matrix single = oracle::gaussian(1, 3, rng);
  EXPECT_LE(max_abs(pool_and_readout(single, r1, r2) - oracle::relu(single * r1) * r2), 1e-14);
  const Matrix z = oracle::gaussian(6, 3, rng);
  EXPECT_LE(max_abs(pool_and_readout(z, r1, r2) - oracle::readout(z, r1, r2)), 1e-12);
  const Matrix p = permutation(6, rng);
  EXPECT_LE(max_abs(pool_and_readout(p * z, r1, r2) - pool_and_readout(z, r1, r2)), 1e-12);
}

TEST(Forwards, PermutationEquivariance) {
  std::mt19937_64 rng(14);
  const Graph g = gradcheck::random_binary_graph(8, 0.4, 4, rng);
  const Matrix p = permutation(8, rng);
  const Matrix a = g.dense_adjacency(), ap = p * a * p.transpose();
  const Matrix x = g.features(), xp = p * x;
  for (Architecture arch : {Architecture::SGC, Architecture::GCN, Architecture::GIN, Architecture::SAGE}) {
    const ModelCheckpoint m = init_checkpoint(arch, Task::NodeClassification, 4, 6, 3, false, 1);
    const Matrix z = node_embeddings(m, model_operator(m, a), x);
    const Matrix zp = node_embeddings(m, model_operator(m, ap), xp);
    EXPECT_LE(max_abs(zp - p * z), 1e-12) << to_string(arch);
  }
}

TEST(Forwards, BinaryArchitecturesDependOnEdgeSetOnly) {
  std::mt19937_64 rng(15);
  const Graph g = gradcheck::random_binary_graph(6, 0.5, 3, rng);
  std::vector<Edge> reversed;
  for (const Edge& e : g.edges()) reversed.push_back({e.target, e.source, 1.0});
  std::reverse(reversed.begin(), reversed.end());
  const Graph h(6, reversed, g.features());
  for (Architecture arch : {Architecture::GIN, Architecture::SAGE}) {
    const ModelCheckpoint m = init_checkpoint(arch, Task::NodeClassification, 3, 5, 2, false, 2);
    EXPECT_EQ(node_embeddings(m, model_operator(m, g), g.features()),
              node_embeddings(m, model_operator(m, h), h.features()));
    EXPECT_FALSE(m.uses_edge_weights);
  }
}

TEST(Checkpoint, ValidationCatchesBrokenShapesAndNames) {
  ModelCheckpoint m = init_checkpoint(Architecture::GIN, Task::GraphRegression, 3, 8, std::nullopt,
                                      false, 0);
  EXPECT_NO_THROW(validate_checkpoint(m));
  ModelCheckpoint bad = m;
  bad.weights.at("w3") = Matrix::Zero(7, 8);
  EXPECT_THROW(validate_checkpoint(bad), Error);
  ModelCheckpoint flag = m;
  flag.uses_edge_weights = true;
  EXPECT_THROW(validate_checkpoint(flag), Error);
  EXPECT_THROW(parse_architecture("GAT"), Error);
  EXPECT_EQ(parse_architecture("sage"), Architecture::SAGE);
  EXPECT_EQ(default_hidden_dim(Task::NodeClassification), 16);
  EXPECT_EQ(default_hidden_dim(Task::GraphRegression), 64);
}

TEST(Init, UniformWithinFanInBound) {
  const ModelCheckpoint m = init_checkpoint(Architecture::GCN, Task::NodeClassification, 25, 16, 4,
                                            false, 3);
  EXPECT_LE(m.weights.at("w1").cwiseAbs().maxCoeff(), std::sqrt(1.0 / 25));
  EXPECT_LE(m.weights.at("w2").cwiseAbs().maxCoeff(), std::sqrt(1.0 / 16));
  const ModelCheckpoint again = init_checkpoint(Architecture::GCN, Task::NodeClassification, 25,
                                                16, 4, false, 3);
  EXPECT_EQ(m.weights.at("w1"), again.weights.at("w1"));
}

class Gradients : public ::testing::TestWithParam<std::tuple<Architecture, Task>> {};

TEST_P(Gradients, MatchCentralDifferences) {
  const auto [arch, task] = GetParam();
  const auto r = gradcheck::check(arch, task, 17);
  EXPECT_EQ(r.failed, 0) << r.worst << " (max rel " << r.max_rel << ")";
  EXPECT_GE(r.min_entries_per_matrix, 20);
}

INSTANTIATE_TEST_SUITE_P(
    AllPairings, Gradients,
    ::testing::Combine(::testing::Values(Architecture::SGC, Architecture::GCN, Architecture::GIN,
                                         Architecture::SAGE),
                       ::testing::Values(Task::NodeClassification, Task::GraphClassification,
                                         Task::GraphRegression)),
    [](const auto& info) {
      std::string name = std::string(to_string(std::get<0>(info.param))) + "_" +
                         std::string(to_string(std::get<1>(info.param)));
      for (char& c : name)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
      return name;
    });

TEST(Training, SgcLossStrictlyDecreasesEarly) {
  SbmSpec spec;
  spec.num_nodes = 120;
  spec.p_in = 0.1;
  spec.p_out = 0.01;
  spec.feature_signal = 2.0;
  spec.seed = 4;
  NodeDataset data{generate_sbm(spec), make_split(120, 4, 0.6, 0.2)};
  const ModelCheckpoint init = init_checkpoint(Architecture::SGC, Task::NodeClassification,
                                               data.graph.feature_dim(), 16, 2, false, 4);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 10;
  cfg.patience = 100;
  const TrainResult r = train_node_classifier(init, data, cfg);
  ASSERT_EQ(r.log.size(), 10u);
  for (std::size_t i = 1; i < r.log.size(); ++i) EXPECT_LT(r.log[i].loss, r.log[i - 1].loss) << i;
}

TEST(Training, ZeroLearningRateKeepsWeights) {
  SbmSpec spec;
  spec.num_nodes = 60;
  NodeDataset data{generate_sbm(spec), make_split(60, 1, 0.6, 0.2)};
  const ModelCheckpoint init = init_checkpoint(Architecture::GCN, Task::NodeClassification,
                                               data.graph.feature_dim(), 8, 2, false, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 25;
  const TrainResult r = train_node_classifier(init, data, cfg);
  for (const auto& [name, value] : init.weights.entries())
    EXPECT_EQ(r.checkpoint.weights.at(name), value) << name;

  Adam adam(init.weights, 0.0);
  WeightSet w = init.weights;
  WeightSet g = zeros_like(w);
  for (auto& [name, value] : g.entries()) value.setOnes();
  for (int i = 0; i < 50; ++i) adam.step(w, g);
  for (const auto& [name, value] : init.weights.entries()) EXPECT_EQ(w.at(name), value);
}

TEST(Training, GinRegressorBeatsConstantMean) {
  RandomGraphSpec spec;
  spec.count = 50;
  spec.seed = 3;
  const auto graphs = generate_regression_graphs(spec, TargetFn::NodeCount);
  GraphDataset data{graphs, make_split(50, 3, 0.6, 0.4)};
  const ModelCheckpoint init = init_checkpoint(Architecture::GIN, Task::GraphRegression, 3, 16,
                                               std::nullopt, false, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 200;
  const TrainResult r = train_graph_model(init, data, cfg);

  double mean = 0;
  for (Index i : data.split.train) mean += *graphs[static_cast<std::size_t>(i)].graph_target();
  mean /= static_cast<double>(data.split.train.size());
  std::vector<double> truth, constant, pred;
  for (Index i : data.split.val) {
    const Graph& g = graphs[static_cast<std::size_t>(i)];
    truth.push_back(*g.graph_target());
    constant.push_back(mean);
    pred.push_back((*forward(r.checkpoint, model_operator(r.checkpoint, g), g.features()).graph_output)(0));
  }
  EXPECT_LT(rmse(pred, truth), rmse(constant, truth));
}

TEST(Training, EmptySplitAndNonFiniteLoss) {
  SbmSpec spec;
  spec.num_nodes = 40;
  const Graph g = generate_sbm(spec);
  const ModelCheckpoint init = init_checkpoint(Architecture::SGC, Task::NodeClassification,
                                               g.feature_dim(), 4, 2, false, 0);
  NodeDataset empty{g, Split{}};
  try {
    train_node_classifier(init, empty, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
  NodeDataset data{g, make_split(40, 0, 0.6, 0.2)};
  ModelCheckpoint blown = init;
  blown.weights.at("theta").setConstant(1e308);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  try {
    train_node_classifier(blown, data, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
  }
}

TEST(Split, PartitionIsDeterministicAndComplete) {
  const Split a = make_split(50, 9, 0.6, 0.2), b = make_split(50, 9, 0.6, 0.2);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.train.size() + a.val.size() + a.test.size(), 50u);
  std::vector<Index> all = a.train;
  all.insert(all.end(), a.val.begin(), a.val.end());
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  for (Index i = 0; i < 50; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)], i);
}
