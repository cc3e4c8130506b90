#include "peanut/eval.hpp"

#include "peanut/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>

namespace peanut {

using nlohmann::json;

namespace {

std::string shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

bool lower_is_better(const std::string& metric) { return metric == "rmse" || metric == "mae"; }

std::string observed_kind(Variant v, const AttackConfig& cfg, bool graph_task) {
  if (v == Variant::PeanutW) return "white-box";
  if (is_random(v)) return "none";
  if (graph_task) return "embeddings";
  return cfg.observe_log_probs ? "log-probs" : "logits";
}

template <typename Adjacency>
Operator perturbed_operator(const ModelCheckpoint& model, const Adjacency& a, const Perturbation& p,
                            bool normalized_domain) {
  if (!normalized_domain) return model_operator(model, build_perturbed_adjacency(a, p));
  require(consumes_edge_weights(model.architecture), ErrorCode::InvalidArgument,
          "normalized-domain injection needs an architecture that consumes the normalized "
          "adjacency (SGC or GCN)");
  return build_perturbed_adjacency(normalize_adjacency(a, model.self_loops), p);
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

double attack_efficacy(const Matrix& z_clean, const Matrix& z_attacked_real_rows) {
  require(z_clean.rows() == z_attacked_real_rows.rows() &&
              z_clean.cols() == z_attacked_real_rows.cols(),
          ErrorCode::Shape, "efficacy needs embeddings of equal shape");
  return (z_attacked_real_rows - z_clean).squaredNorm();
}

MetricMap classification_metrics(std::span<const int> pred, std::span<const int> truth,
                                 int num_classes) {
  return {{"accuracy", accuracy(pred, truth)}, {"macro_f1", macro_f1(pred, truth, num_classes)}};
}

MetricMap regression_metrics(std::span<const double> pred, std::span<const double> truth) {
  return {{"rmse", rmse(pred, truth)}, {"mae", mae(pred, truth)}};
}

MetricMap metric_drops(const MetricMap& clean, const MetricMap& attacked) {
  MetricMap out;
  for (const auto& [name, before] : clean) {
    const auto it = attacked.find(name);
    if (it == attacked.end()) continue;
    out[name] = lower_is_better(name) ? it->second - before : before - it->second;
  }
  return out;
}

Budget node_attack_budget(const Graph& g, const AttackConfig& cfg) {
  Budget b = budget_node_task(g.num_nodes(), cfg.average_degree.value_or(g.average_degree()), cfg.ratio);
  if (cfg.num_virtual) {
    require(*cfg.num_virtual >= 0, ErrorCode::InvalidArgument, "n_v must be non-negative");
    b.num_virtual = *cfg.num_virtual;
  }
  if (cfg.delta) {
    require(*cfg.delta >= 0.0, ErrorCode::InvalidArgument, "delta must be non-negative");
    b.delta = *cfg.delta;
  }
  return b;
}

Perturbation build_attack(const ModelCheckpoint& model, const Graph& g, const Matrix& observed,
                          const Budget& budget, const AttackConfig& cfg, std::uint64_t seed,
                          double* eigenvalue, bool* converged) {
  const Index n = g.num_nodes();
  if (converged) *converged = true;
  // A floored budget of zero still leaves the discrete variants one edge per
  // virtual node; r = 0, n_v = 0 and edgeless graphs are no-ops.
  const bool discrete = is_discrete(cfg.variant);
  if (budget.num_virtual == 0 || cfg.ratio == 0.0 || g.num_edges() == 0 ||
      (budget.delta == 0.0 && !discrete))
    return empty_perturbation(n, budget.delta);
  // Discrete variants only need the ranking, which positive rescaling keeps.
  const Budget raw_budget{budget.num_virtual, discrete ? 1.0 : budget.delta};

  Perturbation raw;
  switch (cfg.variant) {
    case Variant::PeanutW: {
      require(model.architecture == Architecture::SGC, ErrorCode::InvalidArgument,
              "PEANUT-W is the white-box attack on SGC; the model is " +
                  std::string(to_string(model.architecture)));
      const PeanutSolution s = attack_white_box_sgc(g.features(), model.weights.at("theta"), raw_budget,
                                                    cfg.v_mode, seed, cfg.eigen);
      raw = s.perturbation;
      if (eigenvalue) *eigenvalue = s.eigenvalue;
      if (converged) *converged = s.converged;
      break;
    }
    case Variant::Peanut:
    case Variant::PeanutU:
    case Variant::PeanutD: {
      require(observed.rows() == n, ErrorCode::Shape, "observed embedding rows differ from N");
      const PeanutSolution s = peanut_core(observed, raw_budget, cfg.v_mode, seed, cfg.eigen);
      raw = s.perturbation;
      if (eigenvalue) *eigenvalue = s.eigenvalue;
      if (converged) *converged = s.converged;
      break;
    }
    case Variant::Rand:
    case Variant::RandD:
      raw = random_baseline(n, raw_budget, seed);
      break;
  }
  Perturbation out = apply_variant(raw, cfg.variant, budget);
  out.normalized_domain = cfg.normalized_domain;
  return out;
}

ForwardOutput attacked_forward(const ModelCheckpoint& model, const Graph& g, const Perturbation& p,
                               bool normalized_domain, Index dense_cap) {
  require(p.num_real() == g.num_nodes(), ErrorCode::Shape,
          "perturbation rows must equal the number of real nodes");
  if (p.empty()) return forward(model, model_operator(model, g, dense_cap), g.features());
  const Index total = g.num_nodes() + p.num_virtual();
  const Operator op = total <= dense_cap
                          ? perturbed_operator(model, g.dense_adjacency(), p, normalized_domain)
                          : perturbed_operator(model, g.sparse_adjacency(), p, normalized_domain);
  return forward(model, op, pad_virtual_features(g.features(), p.num_virtual()));
}

Matrix attacked_embeddings(const ModelCheckpoint& model, const Graph& g, const Perturbation& p,
                           bool normalized_domain, Index dense_cap) {
  ForwardOutput out = attacked_forward(model, g, p, normalized_domain, dense_cap);
  if (p.empty()) return std::move(out.node_embeddings);
  return real_node_rows(out.node_embeddings, g.num_nodes());
}

Split task_split(Task task, Index n, std::uint64_t seed) {
  return is_graph_task(task) ? make_split(n, seed, 0.8, 0.1) : make_split(n, seed, 0.6, 0.2);
}

AttackReport run_node_attack(const Graph& g, const ModelCheckpoint& model, const AttackConfig& cfg,
                             std::span<const Index> test_nodes, const EvalOptions& opts) {
  const Stopwatch clock;
  require(model.task == Task::NodeClassification, ErrorCode::InvalidArgument,
          "run_node_attack needs a node-classification model");
  require(g.node_labels().has_value(), ErrorCode::InvalidArgument, "graph has no node labels");
  require(!test_nodes.empty(), ErrorCode::EmptyInput, "test node set is empty");
  const int classes = static_cast<int>(model.output_dim());

  AttackReport rep;
  rep.task = model.task;
  rep.architecture = model.architecture;
  rep.variant = cfg.variant;
  rep.r = cfg.ratio;
  rep.seeds = {cfg.seed};
  rep.normalized_domain = cfg.normalized_domain;
  rep.observed = observed_kind(cfg.variant, cfg, false);
  rep.v_mode = cfg.v_mode;

  // Clean forward, and what the attacker sees of it.
  const Matrix z = node_embeddings(model, model_operator(model, g, opts.dense_cap), g.features());
  const Matrix observed = cfg.observe_log_probs ? log_softmax_rows(z) : z;

  const Budget budget = node_attack_budget(g, cfg);
  rep.n_v = budget.num_virtual;
  rep.delta_requested = budget.delta;

  Perturbation p = empty_perturbation(g.num_nodes(), budget.delta);
  try {
    p = build_attack(model, g, observed, budget, cfg, cfg.seed, nullptr, &rep.converged);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateEmbedding) throw;
    rep.degenerate = 1;
  }
  rep.delta_realized = p.realized_budget();
  rep.injected_edges = p.edge_count();
  rep.graphs_attacked = p.empty() ? 0 : 1;

  const Matrix zp = attacked_embeddings(model, g, p, cfg.normalized_domain, opts.dense_cap);
  rep.efficacy = attack_efficacy(z, zp);

  const std::vector<int> clean_pred = argmax_rows(z);
  const std::vector<int> attacked_pred = argmax_rows(zp);
  const std::vector<int>& labels = *g.node_labels();
  std::vector<int> truth, pc, pa;
  for (Index i : test_nodes) {
    require(i >= 0 && i < g.num_nodes(), ErrorCode::InvalidArgument, "test node out of range");
    const auto k = static_cast<std::size_t>(i);
    truth.push_back(labels[k]);
    pc.push_back(clean_pred[k]);
    pa.push_back(attacked_pred[k]);
  }
  rep.clean_metrics = classification_metrics(pc, truth, classes);
  rep.attacked_metrics = classification_metrics(pa, truth, classes);
  rep.metric_drops = metric_drops(rep.clean_metrics, rep.attacked_metrics);
  if (opts.record_timing) rep.timing = clock.seconds();
  return rep;
}

AttackReport run_node_attack(const Graph& g, const ModelCheckpoint& model, const AttackConfig& cfg,
                             const EvalOptions& opts) {
  const Split s = task_split(model.task, g.num_nodes(), model.split_seed);
  return run_node_attack(g, model, cfg, s.test, opts);
}

AttackReport run_graph_attack(std::span<const Graph> dataset, const ModelCheckpoint& model,
                              const AttackConfig& cfg, std::span<const Index> test_graphs,
                              const EvalOptions& opts) {
  const Stopwatch clock;
  require(is_graph_task(model.task), ErrorCode::InvalidArgument,
          "run_graph_attack needs a graph-level model");
  require(cfg.num_virtual.has_value() && *cfg.num_virtual >= 0, ErrorCode::InvalidArgument,
          "graph-level attacks need an explicit non-negative n_v");
  require(!test_graphs.empty(), ErrorCode::EmptyInput, "test graph set is empty");

  AttackReport rep;
  rep.task = model.task;
  rep.architecture = model.architecture;
  rep.variant = cfg.variant;
  rep.r = cfg.ratio;
  rep.n_v = *cfg.num_virtual;
  rep.seeds = {cfg.seed};
  rep.normalized_domain = cfg.normalized_domain;
  rep.observed = observed_kind(cfg.variant, cfg, true);
  rep.v_mode = cfg.v_mode;

  const bool classify = is_classification(model.task);
  const Index classes = classify ? model.output_dim() : 0;
  std::vector<int> truth_c, clean_c, attacked_c;
  std::vector<double> truth_r, clean_r, attacked_r;

  // Deterministic fold in graph-index order.
  for (Index i : test_graphs) {
    require(i >= 0 && i < static_cast<Index>(dataset.size()), ErrorCode::InvalidArgument,
            "test graph index out of range");
    const Graph& g = dataset[static_cast<std::size_t>(i)];
    const ForwardOutput clean = forward(model, model_operator(model, g, opts.dense_cap), g.features());
    const Budget budget{rep.n_v, budget_graph_task(g.num_edges(), cfg.ratio)};
    rep.delta_requested += budget.delta;

    Perturbation p = empty_perturbation(g.num_nodes(), budget.delta);
    bool converged = true;
    try {
      p = build_attack(model, g, clean.node_embeddings, budget, cfg,
                       cfg.seed ^ static_cast<std::uint64_t>(i), nullptr, &converged);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateEmbedding) throw;
      ++rep.degenerate;
    }
    rep.converged = rep.converged && converged;
    rep.delta_realized += p.realized_budget();
    rep.injected_edges += p.edge_count();
    if (!p.empty()) ++rep.graphs_attacked;

    const ForwardOutput attacked = attacked_forward(model, g, p, cfg.normalized_domain, opts.dense_cap);
    rep.efficacy += attack_efficacy(clean.node_embeddings,
                                    real_node_rows(attacked.node_embeddings, g.num_nodes()));
    const RowVector& yc = *clean.graph_output;
    const RowVector& ya = *attacked.graph_output;
    if (classify) {
      truth_c.push_back(graph_class(g, classes));
      clean_c.push_back(argmax_rows(Matrix(yc)).front());
      attacked_c.push_back(argmax_rows(Matrix(ya)).front());
    } else {
      require(g.graph_target().has_value(), ErrorCode::InvalidArgument, "graph has no target");
      truth_r.push_back(*g.graph_target());
      clean_r.push_back(yc(0));
      attacked_r.push_back(ya(0));
    }
  }
  if (classify) {
    rep.clean_metrics = classification_metrics(clean_c, truth_c, static_cast<int>(classes));
    rep.attacked_metrics = classification_metrics(attacked_c, truth_c, static_cast<int>(classes));
  } else {
    rep.clean_metrics = regression_metrics(clean_r, truth_r);
    rep.attacked_metrics = regression_metrics(attacked_r, truth_r);
  }
  rep.metric_drops = metric_drops(rep.clean_metrics, rep.attacked_metrics);
  if (opts.record_timing) rep.timing = clock.seconds();
  return rep;
}

AttackReport run_graph_attack(std::span<const Graph> dataset, const ModelCheckpoint& model,
                              const AttackConfig& cfg, const EvalOptions& opts) {
  const Split s = task_split(model.task, static_cast<Index>(dataset.size()), model.split_seed);
  return run_graph_attack(dataset, model, cfg, s.test, opts);
}

json report_to_json(const AttackReport& r) {
  json j;
  j["task"] = std::string(to_string(r.task));
  j["architecture"] = std::string(to_string(r.architecture));
  j["variant"] = std::string(to_string(r.variant));
  j["r"] = r.r;
  j["n_v"] = r.n_v;
  j["delta_requested"] = r.delta_requested;
  j["delta_realized"] = r.delta_realized;
  j["injected_edges"] = r.injected_edges;
  j["clean_metrics"] = r.clean_metrics;
  j["attacked_metrics"] = r.attacked_metrics;
  j["metric_drops"] = r.metric_drops;
  j["efficacy"] = r.efficacy;
  j["seeds"] = r.seeds;
  j["timing"] = r.timing ? json(*r.timing) : json(nullptr);
  j["normalized_domain"] = r.normalized_domain;
  j["observed"] = r.observed;
  j["v_mode"] = std::string(to_string(r.v_mode));
  j["converged"] = r.converged;
  j["degenerate"] = r.degenerate;
  j["graphs_attacked"] = r.graphs_attacked;
  j["dataset_hash"] = r.dataset_hash;
  return j;
}

namespace {
const std::vector<std::string> kCsvMetrics{"accuracy", "macro_f1", "rmse", "mae"};
}

std::string csv_header() {
  std::string h =
      "task,architecture,variant,r,n_v,seed,delta_requested,delta_realized,injected_edges,"
      "efficacy,normalized_domain,observed";
  for (const std::string& m : kCsvMetrics) h += ",clean_" + m + ",attacked_" + m + ",drop_" + m;
  return h + "\n";
}

std::string csv_row(const AttackReport& r) {
  auto cell = [](const MetricMap& m, const std::string& key) {
    const auto it = m.find(key);
    return it == m.end() ? std::string() : shortest(it->second);
  };
  std::string row = std::string(to_string(r.task)) + "," + std::string(to_string(r.architecture)) +
                    "," + std::string(to_string(r.variant)) + "," + shortest(r.r) + "," +
                    std::to_string(r.n_v) + "," +
                    (r.seeds.empty() ? std::string() : std::to_string(r.seeds.front())) + "," +
                    shortest(r.delta_requested) + "," + shortest(r.delta_realized) + "," +
                    std::to_string(r.injected_edges) + "," + shortest(r.efficacy) + "," +
                    (r.normalized_domain ? "true" : "false") + "," + r.observed;
  for (const std::string& m : kCsvMetrics)
    row += "," + cell(r.clean_metrics, m) + "," + cell(r.attacked_metrics, m) + "," +
           cell(r.metric_drops, m);
  return row + "\n";
}

SeedSummary summarize(std::vector<double> values) {
  require(!values.empty(), ErrorCode::EmptyInput, "cannot summarize an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  SeedSummary s;
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return s;
}

json aggregate_reports(std::span<const AttackReport> reports) {
  require(!reports.empty(), ErrorCode::EmptyInput, "no reports to aggregate");
  auto to_json = [](const SeedSummary& s) {
    return json{{"median", s.median}, {"mean", s.mean}, {"std", s.std}};
  };
  auto fold = [&](auto pick) {
    std::map<std::string, std::vector<double>> by_metric;
    for (const AttackReport& r : reports)
      for (const auto& [name, value] : pick(r)) by_metric[name].push_back(value);
    json out = json::object();
    for (auto& [name, values] : by_metric) out[name] = to_json(summarize(values));
    return out;
  };
  std::vector<double> efficacy;
  std::vector<std::uint64_t> seeds;
  for (const AttackReport& r : reports) {
    efficacy.push_back(r.efficacy);
    seeds.insert(seeds.end(), r.seeds.begin(), r.seeds.end());
  }
  return {{"runs", reports.size()},
          {"seeds", seeds},
          {"clean_metrics", fold([](const AttackReport& r) { return r.clean_metrics; })},
          {"attacked_metrics", fold([](const AttackReport& r) { return r.attacked_metrics; })},
          {"metric_drops", fold([](const AttackReport& r) { return r.metric_drops; })},
          {"efficacy", to_json(summarize(efficacy))}};
}

}  // namespace peanut
