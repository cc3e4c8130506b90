#include "peanut/cli.hpp"

#include "peanut/attack.hpp"
#include "peanut/eval.hpp"
#include "peanut/generators.hpp"
#include "peanut/io.hpp"
#include "peanut/metrics.hpp"
#include "peanut/train.hpp"
#include "peanut/verify.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace peanut {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bad names and missing required values; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {
    const char* env = std::getenv("PEANUT_LOG_LEVEL");
    const std::string v = env ? env : "";
    if (v == "error") level_ = Level::Error;
    else if (v == "warn") level_ = Level::Warn;
    else if (v == "debug") level_ = Level::Debug;
  }
  void warn(const std::string& m) const { emit(Level::Warn, "warn", m); }
  void info(const std::string& m) const { emit(Level::Info, "info", m); }
  void debug(const std::string& m) const { emit(Level::Debug, "debug", m); }

 private:
  void emit(Level l, const char* tag, const std::string& m) const {
    if (l <= level_) err_ << "[" << tag << "] " << m << "\n";
  }
  std::ostream& err_;
  Level level_ = Level::Info;
};

std::string shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::map<std::string, std::string> parse_params(std::string_view body) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t end = body.find(',', pos);
    if (end == std::string_view::npos) end = body.size();
    const std::string_view item = body.substr(pos, end - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw UsageError("generator parameter '" + std::string(item) + "' is not key=value");
    out[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    pos = end + 1;
  }
  return out;
}

class Params {
 public:
  Params(std::string kind, std::map<std::string, std::string> p) : kind_(std::move(kind)), p_(std::move(p)) {}

  double real(const std::string& key, double fallback) { return take(key, fallback, [](const std::string& s) { return std::stod(s); }); }
  Index integer(const std::string& key, Index fallback) { return take(key, fallback, [](const std::string& s) { return static_cast<Index>(std::stoll(s)); }); }
  std::uint64_t seed() { return take<std::uint64_t>("seed", 0, [](const std::string& s) { return std::stoull(s); }); }
  std::string text(const std::string& key, std::string fallback) { return take(key, fallback, [](const std::string& s) { return s; }); }

  void finish() const {
    if (!p_.empty()) throw UsageError("unknown " + kind_ + " parameter '" + p_.begin()->first + "'");
  }

 private:
  template <typename T, typename F>
  T take(const std::string& key, T fallback, F convert) {
    const auto it = p_.find(key);
    if (it == p_.end()) return fallback;
    const std::string v = it->second;
    p_.erase(it);
    try {
      return convert(v);
    } catch (const std::exception&) {
      throw UsageError(kind_ + " parameter " + key + "='" + v + "' is not valid");
    }
  }
  std::string kind_;
  std::map<std::string, std::string> p_;
};

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (const std::string& p : parts) out += (out.empty() ? "" : sep) + p;
  return out;
}

template <typename F>
auto as_usage(F f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::UnknownArchitecture)
      throw UsageError(e.what());
    throw;
  }
}

struct Options {
  std::string dataset;
  std::string model;
  std::string arch;
  std::string task;
  std::string out = "peanut-out";
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> split_seed;
  bool self_loops = false;
  Index hidden = 0;
  Index epochs = 1000;
  Index patience = 100;
  Index batch = 32;
  double lr = 1e-3;

  std::vector<std::string> variants{"PEANUT"};
  std::vector<double> ratios{0.05};
  std::vector<Index> num_virtual;
  std::vector<std::uint64_t> seeds;
  std::string v_mode = "uniform-random";
  bool normalized_domain = false;
  bool log_probs = false;
  std::optional<double> average_degree;
  double tol = 1e-10;
  Index max_iter = 1000;
  bool timing = false;

  std::vector<std::string> suites;
  bool inject_fault = false;
};

Task resolve_task(const Options& o, const LoadedDataset& d) {
  if (!o.task.empty()) return as_usage([&] { return parse_task(o.task); });
  return d.task.value_or(Task::NodeClassification);
}

Index class_count(Task task, const std::vector<Graph>& graphs) {
  int top = -1;
  for (const Graph& g : graphs) {
    if (task == Task::NodeClassification && g.node_labels())
      for (int l : *g.node_labels()) top = std::max(top, l);
    if (task == Task::GraphClassification && g.graph_target())
      top = std::max(top, static_cast<int>(*g.graph_target()));
  }
  require(top >= 0, ErrorCode::InvalidArgument, "dataset carries no class labels for this task");
  return std::max(top + 1, 2);
}

const Graph& single_graph(const LoadedDataset& d) {
  require(d.graphs.size() == 1, ErrorCode::InvalidArgument,
          "node classification expects exactly one graph, got " + std::to_string(d.graphs.size()));
  return d.graphs.front();
}

std::string dataset_hash(Task task, const LoadedDataset& d) {
  return make_manifest("dataset", task, d.graphs, d.source, 0).content_hash;
}

int cmd_train(const Options& o, std::ostream& out, const Log& log) {
  const Architecture arch = as_usage([&] { return parse_architecture(o.arch); });
  const LoadedDataset data = load_dataset(o.dataset);
  const Task task = resolve_task(o, data);
  require(!data.graphs.empty(), ErrorCode::EmptyInput, "dataset is empty");
  const Index in = data.graphs.front().feature_dim();
  const std::optional<Index> classes =
      is_classification(task) ? std::optional<Index>(class_count(task, data.graphs)) : std::nullopt;
  const Index hidden = o.hidden > 0 ? o.hidden : default_hidden_dim(task);
  const std::uint64_t split_seed = o.split_seed.value_or(o.seed);

  ModelCheckpoint init = init_checkpoint(arch, task, in, hidden, classes, o.self_loops, o.seed);
  init.split_seed = split_seed;
  TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.max_epochs = o.epochs;
  cfg.patience = o.patience;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed;

  log.info("training " + std::string(to_string(arch)) + " for " + std::string(to_string(task)));
  TrainResult res;
  if (task == Task::NodeClassification) {
    const Graph& g = single_graph(data);
    res = train_node_classifier(std::move(init), {g, task_split(task, g.num_nodes(), split_seed)}, cfg);
  } else {
    GraphDataset gd{data.graphs, task_split(task, static_cast<Index>(data.graphs.size()), split_seed)};
    res = train_graph_model(std::move(init), gd, cfg);
  }

  const fs::path dir(o.out);
  save_checkpoint(res.checkpoint, dir / "checkpoint.json");
  std::string csv = "epoch,loss,val_metric,learning_rate\n";
  for (const EpochLog& e : res.log)
    csv += std::to_string(e.epoch) + "," + shortest(e.loss) + "," + shortest(e.val_metric) + "," +
           shortest(e.learning_rate) + "\n";
  write_text_file(dir / "train_log.csv", csv);
  write_text_file(dir / "manifest.json",
                  to_canonical_text(manifest_to_json(make_manifest(
                      fs::path(data.source).stem().string(), task, data.graphs, data.source, split_seed))));

  const char* metric = task == Task::NodeClassification ? "accuracy"
                       : task == Task::GraphClassification ? "macro-F1" : "RMSE";
  out << "trained " << to_string(arch) << " on " << to_string(task) << ": best epoch " << res.best_epoch
      << ", validation " << metric << " " << shortest(res.best_val_metric) << "\n"
      << "checkpoint written to " << (dir / "checkpoint.json").string() << "\n";
  return 0;
}

json split_metrics(const ModelCheckpoint& m, const LoadedDataset& data, const std::vector<Index>& idx) {
  if (idx.empty()) return nullptr;
  if (m.task == Task::NodeClassification) {
    const Graph& g = single_graph(data);
    const std::vector<int> pred =
        argmax_rows(node_embeddings(m, model_operator(m, g), g.features()));
    std::vector<int> p, t;
    for (Index i : idx) {
      p.push_back(pred[static_cast<std::size_t>(i)]);
      t.push_back((*g.node_labels())[static_cast<std::size_t>(i)]);
    }
    return classification_metrics(p, t, static_cast<int>(m.output_dim()));
  }
  std::vector<int> pc, tc;
  std::vector<double> pr, tr;
  for (Index i : idx) {
    const Graph& g = data.graphs[static_cast<std::size_t>(i)];
    const RowVector y = *forward(m, model_operator(m, g), g.features()).graph_output;
    if (m.task == Task::GraphClassification) {
      pc.push_back(argmax_rows(Matrix(y)).front());
      tc.push_back(graph_class(g, m.output_dim()));
    } else {
      pr.push_back(y(0));
      tr.push_back(*g.graph_target());
    }
  }
  if (m.task == Task::GraphClassification)
    return classification_metrics(pc, tc, static_cast<int>(m.output_dim()));
  return regression_metrics(pr, tr);
}

int cmd_evaluate(const Options& o, std::ostream& out, const Log&) {
  const ModelCheckpoint m = load_checkpoint(o.model);
  const LoadedDataset data = load_dataset(o.dataset);
  const Index n = m.task == Task::NodeClassification ? single_graph(data).num_nodes()
                                                     : static_cast<Index>(data.graphs.size());
  const Split s = task_split(m.task, n, m.split_seed);
  const json result{{"architecture", std::string(to_string(m.architecture))},
                    {"task", std::string(to_string(m.task))},
                    {"split_seed", m.split_seed},
                    {"dataset_hash", dataset_hash(m.task, data)},
                    {"train", split_metrics(m, data, s.train)},
                    {"val", split_metrics(m, data, s.val)},
                    {"test", split_metrics(m, data, s.test)}};
  write_text_file(fs::path(o.out) / "evaluation.json", to_canonical_text(result));
  for (const char* part : {"train", "val", "test"}) {
    out << part << ":";
    if (result[part].is_null()) out << " (empty)";
    else
      for (const auto& [k, v] : result[part].items()) out << " " << k << "=" << shortest(v.get<double>());
    out << "\n";
  }
  return 0;
}

std::string report_name(const AttackReport& r, std::uint64_t seed) {
  return "report_" + std::string(to_string(r.variant)) + "_r" + shortest(r.r) + "_nv" +
         std::to_string(r.n_v) + "_seed" + std::to_string(seed) + ".json";
}

int cmd_attack(const Options& o, bool sweep, std::ostream& out, const Log& log) {
  if (o.seeds.empty()) throw UsageError("--seed is required");
  std::vector<Variant> variants;
  for (const std::string& v : o.variants) variants.push_back(as_usage([&] { return parse_variant(v); }));
  const VMode v_mode = as_usage([&] { return parse_v_mode(o.v_mode); });
  const ModelCheckpoint m = load_checkpoint(o.model);
  const LoadedDataset data = load_dataset(o.dataset);
  if (is_graph_task(m.task) && o.num_virtual.empty())
    throw UsageError("graph-level attacks need --num-virtual");
  const std::string hash = dataset_hash(m.task, data);

  std::vector<std::optional<Index>> nvs;
  for (Index nv : o.num_virtual) nvs.emplace_back(nv);
  if (nvs.empty()) nvs.emplace_back(std::nullopt);

  const fs::path dir(o.out);
  const fs::path csv_path = dir / "reports.csv";
  std::string rows = fs::exists(csv_path) ? "" : csv_header();
  std::map<std::string, std::vector<AttackReport>> cells;
  std::vector<std::string> cell_order;
  EvalOptions eo;
  eo.record_timing = o.timing;

  for (Variant variant : variants)
    for (double r : o.ratios)
      for (const auto& nv : nvs)
        for (std::uint64_t seed : o.seeds) {
          AttackConfig cfg;
          cfg.variant = variant;
          cfg.ratio = r;
          cfg.num_virtual = nv;
          cfg.v_mode = v_mode;
          cfg.seed = seed;
          cfg.normalized_domain = o.normalized_domain;
          cfg.observe_log_probs = o.log_probs;
          cfg.average_degree = o.average_degree;
          cfg.eigen.tol = o.tol;
          cfg.eigen.max_iter = o.max_iter;
          AttackReport rep = m.task == Task::NodeClassification
                                 ? run_node_attack(single_graph(data), m, cfg, eo)
                                 : run_graph_attack(data.graphs, m, cfg, eo);
          rep.dataset_hash = hash;
          if (!rep.converged) log.warn("eigensolver did not converge; best iterate used");
          write_text_file(dir / report_name(rep, seed), to_canonical_text(report_to_json(rep)));
          rows += csv_row(rep);
          const std::string key = std::string(to_string(variant)) + " r=" + shortest(r) +
                                  " n_v=" + std::to_string(rep.n_v);
          if (!cells.contains(key)) cell_order.push_back(key);
          cells[key].push_back(rep);
          std::string drops;
          for (const auto& [k, v] : rep.metric_drops) drops += " " + k + "=" + shortest(v);
          out << key << " seed=" << seed << " drop:" << drops << " efficacy=" << shortest(rep.efficacy) << "\n";
        }

  std::ofstream csv(csv_path, std::ios::app | std::ios::binary);
  require(static_cast<bool>(csv), ErrorCode::Io, "cannot append to " + csv_path.string());
  csv << rows;

  if (sweep) {
    json summary = json::array();
    for (const std::string& key : cell_order) {
      const auto& reps = cells.at(key);
      json cell = aggregate_reports(reps);
      cell["variant"] = std::string(to_string(reps.front().variant));
      cell["r"] = reps.front().r;
      cell["n_v"] = reps.front().n_v;
      summary.push_back(std::move(cell));
    }
    write_text_file(dir / "summary.json", to_canonical_text(summary));
    out << "summary written to " << (dir / "summary.json").string() << "\n";
  }
  return 0;
}

int cmd_verify(const Options& o, std::ostream& out, const Log&) {
  VerifyOptions vo;
  vo.suites = o.suites;
  vo.seed = o.seed;
  vo.inject_fault = o.inject_fault;
  const std::vector<SuiteResult> results = as_usage([&] { return run_verification(vo); });
  bool ok = true;
  for (const SuiteResult& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.cases << " cases): " << r.detail << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

// Values from the JSON config become flags unless the same flag is already on
// the command line, so flags win over the file.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  json cfg;
  try {
    cfg = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path + ": " + e.what());
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  auto scalar = [](const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return shortest(v.get<double>());
    return v.dump();
  };
  std::vector<std::string> merged = args;
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (key == "config" || given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) merged.push_back(flag);
    } else if (value.is_array()) {
      merged.push_back(flag);
      for (const json& v : value) merged.push_back(scalar(v));
    } else if (!value.is_null()) {
      merged.push_back(flag);
      merged.push_back(scalar(value));
    }
  }
  return merged;
}

}  // namespace

LoadedDataset load_dataset(const std::string& spec) {
  if (spec.empty()) throw UsageError("--dataset is required");
  LoadedDataset d;
  d.source = spec;
  const std::size_t colon = spec.find(':');
  const std::string kind = colon == std::string::npos ? "" : spec.substr(0, colon);
  if (kind == "sbm" || kind == "regression" || kind == "classification") {
    Params p(kind, parse_params(std::string_view(spec).substr(colon + 1)));
    if (kind == "sbm") {
      SbmSpec s;
      s.num_nodes = p.integer("n", s.num_nodes);
      s.blocks = p.integer("blocks", s.blocks);
      s.p_in = p.real("p_in", s.p_in);
      s.p_out = p.real("p_out", s.p_out);
      s.feature_signal = p.real("signal", s.feature_signal);
      s.seed = p.seed();
      p.finish();
      d.graphs.push_back(as_usage([&] { return generate_sbm(s); }));
      d.task = Task::NodeClassification;
      return d;
    }
    RandomGraphSpec s;
    s.count = p.integer("count", s.count);
    s.min_nodes = p.integer("min", s.min_nodes);
    s.max_nodes = p.integer("max", s.max_nodes);
    s.extra_edge_prob = p.real("extra", s.extra_edge_prob);
    s.feature_dim = p.integer("dim", s.feature_dim);
    s.seed = p.seed();
    if (kind == "regression") {
      const std::string target = p.text("target", "node-count");
      p.finish();
      d.graphs = as_usage([&] { return generate_regression_graphs(s, parse_target_fn(target)); });
      d.task = Task::GraphRegression;
    } else {
      const Index classes = p.integer("classes", 2);
      p.finish();
      d.graphs = as_usage([&] { return generate_classification_graphs(s, classes); });
      d.task = Task::GraphClassification;
    }
    return d;
  }

  const fs::path path(spec);
  if (!fs::exists(path)) throw UsageError("dataset '" + spec + "' is neither a file nor a generator spec");
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, spec + ": " + e.what());
  }
  if (j.is_object() && j.contains("source") && !j.contains("num_nodes")) {
    // A manifest: resolve its source relative to the manifest's directory.
    std::string source = j.at("source").get<std::string>();
    const std::size_t c = source.find(':');
    const bool generator = c != std::string::npos && c > 1;
    if (!generator && fs::path(source).is_relative()) source = (path.parent_path() / source).string();
    LoadedDataset inner = load_dataset(source);
    if (j.contains("task")) inner.task = parse_task(j.at("task").get<std::string>());
    return inner;
  }
  d.graphs = load_graphs(path);
  return d;
}

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  const Log log(err);
  Options o;
  CLI::App app{"Virtual-node injection attacks (PEANUT) on small graph networks", "peanut"};
  app.require_subcommand(1, 1);

  auto dataset_opts = [&](CLI::App* c) {
    c->add_option("--dataset", o.dataset, "Graph JSON, manifest JSON, or generator spec");
    c->add_option("--out", o.out, "Output directory");
    c->add_option("--config", "JSON config; flags given here take precedence");
  };

  CLI::App* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  dataset_opts(train);
  train->add_option("--arch", o.arch, "SGC, GCN, GIN or SAGE")->required();
  train->add_option("--task", o.task, "node-classification, graph-classification or graph-regression");
  train->add_option("--seed", o.seed, "Initialization and training seed");
  train->add_option("--split-seed", o.split_seed, "Split seed (defaults to --seed)");
  train->add_flag("--self-loops", o.self_loops, "Normalize A + I instead of A (SGC/GCN)");
  train->add_option("--hidden", o.hidden, "Hidden width (16 for node tasks, 64 for graph tasks)");
  train->add_option("--epochs", o.epochs, "Maximum epochs");
  train->add_option("--patience", o.patience, "Early-stopping patience");
  train->add_option("--batch-size", o.batch, "Graphs per mini-batch");
  train->add_option("--lr", o.lr, "Adam learning rate");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Clean metrics of a checkpoint on each split");
  dataset_opts(evaluate);
  evaluate->add_option("--model", o.model, "Checkpoint JSON")->required();

  auto attack_opts = [&](CLI::App* c) {
    dataset_opts(c);
    c->add_option("--model", o.model, "Checkpoint JSON")->required();
    c->add_option("--variant", o.variants, "PEANUT-W, PEANUT, PEANUT-U, PEANUT-D, RAND, RAND-D");
    c->add_option("--ratio", o.ratios, "Budget ratio r");
    c->add_option("--num-virtual", o.num_virtual, "Number of virtual nodes n_v");
    c->add_option("--seed", o.seeds, "Attack seed(s)");
    c->add_option("--v-mode", o.v_mode, "uniform-random or ones");
    c->add_flag("--normalized-domain", o.normalized_domain, "Inject into S instead of A");
    c->add_flag("--log-probs", o.log_probs, "Attacker observes log-probabilities (node tasks)");
    c->add_option("--avg-degree", o.average_degree, "Average degree for the node budget");
    c->add_option("--tol", o.tol, "Power-iteration tolerance");
    c->add_option("--max-iter", o.max_iter, "Power-iteration iteration cap");
    c->add_flag("--timing", o.timing, "Record wall-clock time in reports");
  };
  CLI::App* attack = app.add_subcommand("attack", "Attack a trained model; one report per cell");
  attack_opts(attack);
  CLI::App* sweep = app.add_subcommand("sweep", "Attack over a grid and summarize across seeds");
  attack_opts(sweep);

  CLI::App* verify = app.add_subcommand("verify", "Run the oracle suites");
  verify->add_option("--suite", o.suites, "Suite(s) to run: " + join(suite_names(), ", "));
  verify->add_option("--seed", o.seed, "Seed for the random instances");
  verify->add_flag("--inject-fault", o.inject_fault, "Test hook: corrupt the checked quantities");
  verify->add_option("--config", "JSON config; flags given here take precedence");

  try {
    std::vector<std::string> args = merge_config(raw_args);
    std::vector<const char*> argv{"peanut"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 2;
    }
    if (*train) return cmd_train(o, out, log);
    if (*evaluate) return cmd_evaluate(o, out, log);
    if (*attack) return cmd_attack(o, false, out, log);
    if (*sweep) return cmd_attack(o, true, out, log);
    if (*verify) return cmd_verify(o, out, log);
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace peanut
