#include "gradcheck.hpp"
#include "oracles.hpp"
#include "peanut/eval.hpp"
#include "peanut/generators.hpp"
#include "peanut/metrics.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

using namespace peanut;

namespace {

Graph small_sbm(std::uint64_t seed, Index n = 80) {
  SbmSpec spec;
  spec.num_nodes = n;
  spec.p_in = 0.15;
  spec.p_out = 0.02;
  spec.seed = seed;
  return generate_sbm(spec);
}

std::vector<Index> all_nodes(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

std::size_t count_fields(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

TEST(Metrics, Accuracy) {
  const std::vector<int> ten(10, 1);
  EXPECT_EQ(accuracy(ten, ten), 100.0);
  EXPECT_NEAR(accuracy(std::vector<int>{1, 1, 1}, std::vector<int>{1, 0, 1}), 66.667, 1e-3);
  EXPECT_EQ(accuracy(std::vector<int>{0, 1, 0}, std::vector<int>{1, 0, 1}), 0.0);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST(Metrics, MacroF1) {
  EXPECT_EQ(macro_f1(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 1}, 2), 100.0);
  EXPECT_NEAR(macro_f1(std::vector<int>{0, 0}, std::vector<int>{0, 1}, 2), 100.0 / 3.0, 1e-12);
  EXPECT_EQ(macro_f1(std::vector<int>{0, 0, 0}, std::vector<int>{0, 0, 0}, 2), 50.0);
  EXPECT_THROW(macro_f1(std::vector<int>{}, std::vector<int>{}, 2), Error);
}

TEST(Metrics, Regression) {
  const std::vector<double> t{3, 4};
  EXPECT_EQ(rmse(t, t), 0.0);
  EXPECT_EQ(mae(t, t), 0.0);
  EXPECT_NEAR(rmse(std::vector<double>{0, 0}, t), std::sqrt(12.5), 1e-12);
  EXPECT_EQ(mae(std::vector<double>{0, 0}, t), 3.5);
  EXPECT_NEAR(rmse(std::vector<double>{5.5, 6.5}, t), 2.5, 1e-12);
  EXPECT_NEAR(mae(std::vector<double>{5.5, 6.5}, t), 2.5, 1e-12);
  EXPECT_THROW(rmse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST(Metrics, ArgmaxTiesGoLow) {
  Matrix s(2, 3);
  s << 1, 1, 0, 0, 2, 2;
  EXPECT_EQ(argmax_rows(s), (std::vector<int>{0, 1}));
}

TEST(Efficacy, Examples) {
  const Matrix z = Matrix::Ones(3, 3);
  EXPECT_EQ(attack_efficacy(z, z), 0.0);
  EXPECT_EQ(attack_efficacy(z, z + Matrix::Identity(3, 3)), 3.0);
  EXPECT_THROW(attack_efficacy(z, Matrix::Ones(2, 3)), Error);
}

TEST(Efficacy, SgcClosedFormWithZeroVirtualFeatures) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Graph g = gradcheck::random_binary_graph(10, 0.3, 4, rng);
    ModelCheckpoint m = init_checkpoint(Architecture::SGC, Task::NodeClassification, 4, 16, 3,
                                        false, static_cast<std::uint64_t>(trial));
    Perturbation p;
    p.connections = oracle::gaussian(10, 2, rng);
    p.normalized_domain = true;
    const Matrix s = oracle::normalized(g.dense_adjacency(), false);
    const Matrix z = oracle::sgc(s, g.features(), m.weights.at("theta"));
    const Matrix zp = attacked_embeddings(m, g, p, true);
    const double want = oracle::rank_objective(p.connections,
                                               oracle::matmul(g.features(), m.weights.at("theta")));
    EXPECT_LE(oracle::rel_err(attack_efficacy(z, zp), want), 1e-8);
  }
}

TEST(Drops, SignConventions) {
  const MetricMap clean{{"accuracy", 90}, {"macro_f1", 80}, {"rmse", 1}, {"mae", 0.5}};
  const MetricMap attacked{{"accuracy", 70}, {"macro_f1", 75}, {"rmse", 3}, {"mae", 2}};
  const MetricMap d = metric_drops(clean, attacked);
  EXPECT_EQ(d.at("accuracy"), 20);
  EXPECT_EQ(d.at("macro_f1"), 5);
  EXPECT_EQ(d.at("rmse"), 2);
  EXPECT_EQ(d.at("mae"), 1.5);
}

TEST(NodeAttack, ZeroRatioIsBitIdentical) {
  const Graph g = small_sbm(1);
  const ModelCheckpoint m = init_checkpoint(Architecture::GCN, Task::NodeClassification,
                                            g.feature_dim(), 8, 2, false, 1);
  AttackConfig cfg;
  cfg.ratio = 0.0;
  const AttackReport r = run_node_attack(g, m, cfg, all_nodes(80));
  EXPECT_EQ(r.clean_metrics, r.attacked_metrics);
  EXPECT_EQ(r.efficacy, 0.0);
  EXPECT_EQ(r.n_v, 0);

  const Operator op = model_operator(m, g);
  EXPECT_EQ(attacked_forward(m, g, empty_perturbation(80), false).node_embeddings,
            forward(m, op, g.features()).node_embeddings);
}

TEST(NodeAttack, WhiteBoxSgcReachesClosedFormValue) {
  const Graph g = small_sbm(2);
  const ModelCheckpoint m = init_checkpoint(Architecture::SGC, Task::NodeClassification,
                                            g.feature_dim(), 16, 2, false, 2);
  AttackConfig cfg;
  cfg.variant = Variant::PeanutW;
  cfg.ratio = 0.05;
  cfg.normalized_domain = true;
  const AttackReport r = run_node_attack(g, m, cfg, all_nodes(80));
  const double lambda =
      oracle::dominant(oracle::matmul(g.features(), m.weights.at("theta"))).value;
  EXPECT_LE(oracle::rel_err(r.efficacy, r.delta_requested * r.delta_requested * lambda), 1e-8);
  EXPECT_NEAR(r.delta_realized, r.delta_requested, 1e-9 * r.delta_requested);
}

TEST(NodeAttack, ReportConsistency) {
  const Graph g = small_sbm(3);
  const ModelCheckpoint m = init_checkpoint(Architecture::GCN, Task::NodeClassification,
                                            g.feature_dim(), 8, 2, false, 3);
  for (Variant v : {Variant::Peanut, Variant::PeanutU, Variant::PeanutD, Variant::Rand,
                    Variant::RandD}) {
    AttackConfig cfg;
    cfg.variant = v;
    cfg.ratio = 0.05;
    cfg.seed = 4;
    const AttackReport r = run_node_attack(g, m, cfg, all_nodes(80));
    ASSERT_EQ(r.n_v, 4) << to_string(v);
    if (v == Variant::Peanut) EXPECT_LE(r.delta_realized, r.delta_requested * (1 + 1e-12));
    if (v == Variant::PeanutU || v == Variant::Rand)
      EXPECT_NEAR(r.delta_realized, r.delta_requested, 1e-9 * r.delta_requested);
    if (is_discrete(v))
      EXPECT_EQ(r.injected_edges, r.n_v * discrete_edges_per_node({r.n_v, r.delta_requested}));
    EXPECT_GE(r.efficacy, 0.0);
    EXPECT_EQ(r.metric_drops.at("accuracy"),
              r.clean_metrics.at("accuracy") - r.attacked_metrics.at("accuracy"));
  }
}

TEST(NodeAttack, PeanutWNeedsSgc) {
  const Graph g = small_sbm(4);
  const ModelCheckpoint m = init_checkpoint(Architecture::GCN, Task::NodeClassification,
                                            g.feature_dim(), 8, 2, false, 4);
  AttackConfig cfg;
  cfg.variant = Variant::PeanutW;
  EXPECT_THROW(run_node_attack(g, m, cfg, all_nodes(80)), Error);
}

TEST(GraphAttack, ZeroVirtualNodesReproduceClean) {
  RandomGraphSpec spec;
  spec.count = 20;
  spec.seed = 5;
  const auto graphs = generate_regression_graphs(spec, TargetFn::NodeCount);
  const ModelCheckpoint m = init_checkpoint(Architecture::GIN, Task::GraphRegression, 3, 8,
                                            std::nullopt, false, 5);
  AttackConfig cfg;
  cfg.num_virtual = 0;
  const AttackReport r = run_graph_attack(graphs, m, cfg, all_nodes(20));
  EXPECT_EQ(r.clean_metrics, r.attacked_metrics);
  EXPECT_EQ(r.efficacy, 0.0);
  EXPECT_EQ(r.metric_drops.at("rmse"), 0.0);

  cfg.num_virtual = 2;
  cfg.variant = Variant::PeanutD;
  const AttackReport d = run_graph_attack(graphs, m, cfg, all_nodes(20));
  EXPECT_EQ(d.graphs_attacked, 20);
  EXPECT_GT(d.injected_edges, 0);
  AttackConfig missing;
  EXPECT_THROW(run_graph_attack(graphs, m, missing, all_nodes(20)), Error);
}

TEST(GraphAttack, ContinuousVariantOnBinaryArchitectureIsRejected) {
  RandomGraphSpec spec;
  spec.count = 4;
  const auto graphs = generate_regression_graphs(spec, TargetFn::NodeCount);
  const ModelCheckpoint m = init_checkpoint(Architecture::GIN, Task::GraphRegression, 3, 8,
                                            std::nullopt, false, 6);
  AttackConfig cfg;
  cfg.num_virtual = 2;
  cfg.variant = Variant::PeanutU;
  try {
    run_graph_attack(graphs, m, cfg, all_nodes(4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonBinaryAdjacency);
  }
}

TEST(Reports, JsonAndCsvShape) {
  AttackReport r;
  r.r = 0.05;
  r.n_v = 4;
  r.seeds = {7};
  r.clean_metrics = {{"accuracy", 90}, {"macro_f1", 89}};
  r.attacked_metrics = {{"accuracy", 80}, {"macro_f1", 79}};
  r.metric_drops = metric_drops(r.clean_metrics, r.attacked_metrics);
  const auto j = report_to_json(r);
  for (const char* key : {"task", "architecture", "variant", "r", "n_v", "delta_requested",
                          "delta_realized", "clean_metrics", "attacked_metrics", "metric_drops",
                          "efficacy", "seeds", "normalized_domain", "observed"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_FALSE(j.contains("timing") && !j["timing"].is_null());
  const std::string row = csv_row(r);
  EXPECT_EQ(count_fields(csv_header()), count_fields(row));
  EXPECT_EQ(row.find('\n'), row.size() - 1);
}

TEST(Reports, SeedSummary) {
  const SeedSummary s = summarize({1, 2, 3, 10});
  EXPECT_EQ(s.median, 2.5);
  EXPECT_EQ(s.mean, 4.0);
  EXPECT_NEAR(s.std, std::sqrt(50.0 / 3.0), 1e-12);
  EXPECT_EQ(summarize({5}).std, 0.0);
}

TEST(Splits, TaskFractions) {
  const Split nc = task_split(Task::NodeClassification, 100, 1);
  EXPECT_EQ(nc.train.size(), 60u);
  EXPECT_EQ(nc.val.size(), 20u);
  EXPECT_EQ(nc.test.size(), 20u);
  const Split gr = task_split(Task::GraphRegression, 200, 1);
  EXPECT_EQ(gr.train.size(), 160u);
  EXPECT_EQ(gr.val.size(), 20u);
  EXPECT_EQ(gr.test.size(), 20u);
}
