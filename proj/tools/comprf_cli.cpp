// comprf: train, predict, evaluate, cross-validate, benchmark and simulate
// comparison-based random forests. Every run that writes files also writes
// <output>.manifest.json, which `comprf replay` re-executes and verifies.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <deque>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "comprf/comprf.hpp"

namespace {

using namespace comprf;
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigExit = 2, kDataExit = 3, kRuntimeExit = 4 };

#ifndef COMPRF_DEFAULT_DATA_DIR
#define COMPRF_DEFAULT_DATA_DIR "data"
#endif

struct Context {
  std::vector<std::string> argv;
  bool write_manifest = true;
  /// Output files of the last command, in write order.
  std::vector<std::string> outputs;
};

std::string iso_utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_digest(const std::string& path) {
  return hex64(model_detail::checksum(io_detail::read_file(path)));
}

/// Collects manifest content while a command runs and writes it at the end.
class Manifest {
 public:
  Manifest(Context& ctx, std::string command)
      : ctx_(ctx), command_(std::move(command)), started_(std::chrono::system_clock::now()),
        clock_(std::chrono::steady_clock::now()) {
    ctx_.outputs.clear();
  }

  Json& body() { return body_; }
  void timing(const std::string& key, Json seconds) { timings_[key] = std::move(seconds); }

  void write_output(const std::string& path, const std::string& content) {
    write_atomic(path, content);
    ctx_.outputs.push_back(path);
  }
  void record_output(const std::string& path) { ctx_.outputs.push_back(path); }

  void finish(const std::string& manifest_path) {
    if (!ctx_.write_manifest) return;
    Json j;
    j["tool"] = "comprf";
    j["version"] = kVersion;
    j["command"] = command_;
    j["argv"] = ctx_.argv;
    j["cwd"] = fs::current_path().string();
    for (auto& [k, v] : body_.items()) j[k] = v;
    Json outs = Json::array();
    for (const auto& p : ctx_.outputs) {
      outs.push_back(Json{{"path", p}, {"bytes", fs::file_size(p)}, {"fnv1a64", file_digest(p)}});
    }
    j["outputs"] = std::move(outs);
    j["started"] = iso_utc(started_);
    j["finished"] = iso_utc(std::chrono::system_clock::now());
    timings_["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();
    j["timings"] = timings_;
    write_atomic(manifest_path, j.dump(2) + "\n");
  }

 private:
  Context& ctx_;
  std::string command_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point clock_;
  Json body_ = Json::object();
  Json timings_ = Json::object();
};

/// String-valued flags that map one-to-one onto experiment config keys, so
/// that defaults < config file < flags is a plain sequence of set() calls.
class FlagSet {
 public:
  void option(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& s = slots_.emplace_back();
    s.key = key;
    s.option = app->add_option(flag, s.value, help);
  }
  void flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& s = slots_.emplace_back();
    s.key = key;
    s.is_flag = true;
    s.option = app->add_flag(flag, s.on, help);
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& s : slots_) {
      if (!s.option->count()) continue;
      if (s.is_flag) {
        c.set(s.key, s.on ? "true" : "false");
      } else if (s.key == "grid") {
        // "N0 list : M list", e.g. "1,4,16,64:1,4,16,64,256".
        const auto colon = s.value.find(':');
        if (colon == std::string::npos) throw ConfigError("--grid expects 'n0 list:M list'");
        c.set("grid_n0", s.value.substr(0, colon));
        c.set("grid_trees", s.value.substr(colon + 1));
      } else {
        c.set(s.key, s.value);
      }
    }
  }

 private:
  struct Slot {
    std::string key;
    std::string value;
    bool on = false;
    bool is_flag = false;
    CLI::Option* option = nullptr;
  };
  std::deque<Slot> slots_;
};

void data_flags(CLI::App* app, FlagSet& f) {
  f.option(app, "--data", "data", "Training data file");
  f.option(app, "--format", "format", "csv, libsvm, distmatrix or gram");
  f.option(app, "--labels", "labels", "Response file for distmatrix/gram data");
  f.option(app, "--label-column", "label_column", "CSV label column: index (negative from the end) or name");
  f.option(app, "--task", "task", "classify or regress");
  f.option(app, "--classes", "classes", "Keep only these class codes, relabelled in order");
  f.option(app, "--max-items", "max_items", "Seeded stratified subsample size");
}

void forest_flags(CLI::App* app, FlagSet& f) {
  f.option(app, "--policy", "policy", "supervised or unsupervised pivots");
  f.option(app, "--n0", "n0", "Leaf size threshold");
  f.option(app, "--trees", "trees", "Number of trees M");
  f.option(app, "--ratio", "ratio", "Per-tree subsampling ratio r in (0, 1]");
  f.option(app, "--rule", "rule", "one_vs_one or plurality");
  f.option(app, "--pooling", "pooling", "multiset or set");
  f.option(app, "--aggregation", "aggregation", "pooled or tree_average");
  f.option(app, "--sampling", "sampling", "uniform_pair or uniform_first");
}

void run_flags(CLI::App* app, FlagSet& f) {
  f.option(app, "--seed", "seed", "Master seed");
  f.option(app, "--threads", "threads", "Worker threads (0: COMPRF_THREADS or all cores)");
}

void eval_flags(CLI::App* app, FlagSet& f) {
  f.option(app, "--name", "name", "Experiment name");
  f.option(app, "--test-data", "test_data", "Fixed test file in the format of --data");
  f.flag(app, "--cv", "cv", "Select (n0, M) per repeat by cross-validation");
  f.option(app, "--grid", "grid", "CV grid 'n0 list:M list'");
  f.option(app, "--folds", "folds", "Cross-validation folds");
  f.flag(app, "--stratified-folds", "stratified_folds", "Stratify CV folds by class");
  f.option(app, "--train-fraction", "train_fraction", "Training share of each split");
  f.flag(app, "--stratified", "stratified", "Stratify the train/test split");
  f.option(app, "--repeats", "repeats", "Number of seeded repeats R");
  f.option(app, "--knn", "knn", "KNN baseline k candidates");
  f.option(app, "--out", "out", "Output prefix");
}

ExperimentConfig resolve(const std::string& config_path, const FlagSet& flags, ExperimentConfig base = {}) {
  ExperimentConfig c = config_path.empty() ? std::move(base) : load_config(config_path);
  flags.apply(c);
  return c;
}

std::string out_prefix(const ExperimentConfig& c) {
  return c.out.empty() ? (fs::path("comprf_out") / c.name).string() : c.out;
}

Json fingerprint_json(const Dataset& d) {
  return Json{{"fingerprint", hex64(d.fingerprint)}, {"items", d.size()}, {"dimension", d.dimension()}};
}

std::string format_prediction(const Dataset& data, const Prediction& p) {
  if (data.task() == TaskKind::regression) {
    std::ostringstream os;
    os.precision(17);
    os << p.value;
    return os.str();
  }
  return p.label < data.class_names.size() ? data.class_names[p.label] : std::to_string(p.label);
}

// ---------------------------------------------------------------------------

int cmd_train(Context& ctx, const ExperimentConfig& c, const std::string& model_path) {
  if (model_path.empty()) throw ConfigError("train needs --model");
  Manifest m(ctx, "train");
  const PreparedData prepared = prepare_data(c);
  const Dataset& data = prepared.data;
  ForestParams params = c.forest;
  params.task = c.task;
  params.seed = c.seed;
  const auto train = prepared.fixed ? prepared.fixed->train : all_items(data.size());
  const auto t0 = std::chrono::steady_clock::now();
  const Forest forest = std::visit(
      [&](const auto& o) {
        return fit(train, o, data.responses(), params, {resolve_threads(static_cast<int>(c.threads)), data.fingerprint});
      },
      make_backend(data));
  m.timing("fit_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  save(forest, model_path);
  m.record_output(model_path);
  std::cout << "trained " << forest.trees.size() << " trees on " << train.size() << " items; triplet queries: "
            << forest.build_queries() << "\n";
  m.body()["config"] = c.to_text();
  m.body()["seeds"] = Json{{"seed", c.seed}};
  m.body()["datasets"] = Json{{"train", fingerprint_json(data)}};
  m.body()["triplet_queries"] = forest.build_queries();
  m.finish(model_path + ".manifest.json");
  return kOk;
}

int cmd_predict(Context& ctx, const ExperimentConfig& c, const std::string& model_path,
                const std::string& queries_path) {
  if (model_path.empty()) throw ConfigError("predict needs --model");
  if (c.out.empty()) throw ConfigError("predict needs --out for the predictions CSV");
  Manifest m(ctx, "predict");
  const PreparedData prepared = prepare_data(c);
  const Dataset& data = prepared.data;
  const Forest forest = load(model_path, data.fingerprint);
  const Responses responses = data.responses();
  const unsigned threads = resolve_threads(static_cast<int>(c.threads));
  std::vector<Prediction> preds;
  std::visit(
      [&](const auto& o) {
        if (queries_path.empty()) {
          preds = predict_batch(forest, all_items(data.size()), o, responses, threads);
          return;
        }
        const Matrix q = load_matrix(queries_path);
        preds.resize(q.rows());
        parallel_for(q.rows(), threads, [&](std::size_t i) {
          using O = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<O, GramOracle>) {
            if (q.cols() != o.size() + 1) {
              throw DataError("gram queries need n kernel values plus the query's self-kernel per row");
            }
            const auto row = q.row(i);
            preds[i] = predict(forest, kQueryItem, o.with_query(row.first(o.size()), row[o.size()]), responses);
          } else {
            preds[i] = predict(forest, kQueryItem, o.with_query(q.row(i)), responses);
          }
        });
      },
      make_backend(data));
  std::ostringstream os;
  os << "index,prediction,pooled_size,triplet_queries\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    os << i << ',' << format_prediction(data, preds[i]) << ',' << preds[i].pooled_size << ','
       << preds[i].triplet_queries << '\n';
  }
  m.write_output(c.out, os.str());
  std::cout << "predicted " << preds.size() << " queries; triplet queries: " << total_queries(preds) << "\n";
  m.body()["config"] = c.to_text();
  m.body()["model"] = Json{{"path", model_path}, {"fnv1a64", file_digest(model_path)}};
  m.body()["datasets"] = Json{{"train", fingerprint_json(data)}};
  if (!queries_path.empty()) m.body()["queries"] = Json{{"path", queries_path}, {"fnv1a64", file_digest(queries_path)}};
  m.finish(c.out + ".manifest.json");
  return kOk;
}

void write_experiment(Manifest& m, const ExperimentConfig& c, const PreparedData& prepared,
                      const ExperimentResult& r) {
  const std::string prefix = out_prefix(c);
  Json report{{"forest", to_json(r.forest)}};
  if (r.knn) report["knn"] = to_json(*r.knn);
  m.write_output(prefix + ".json", report.dump(2) + "\n");
  m.write_output(prefix + ".repeats.csv", repeats_csv(r.forest));
  if (r.knn) m.write_output(prefix + ".knn.csv", repeats_csv(*r.knn));
  if (r.forest.cross_validated) m.write_output(prefix + ".grid.csv", grid_csv(r.forest.first_grid, r.forest.metric));
  m.body()["config"] = c.to_text();
  Json seeds = Json::array();
  for (const auto& row : r.forest.repeats) seeds.push_back(row.seed);
  m.body()["seeds"] = Json{{"seed", c.seed}, {"repeat_seeds", std::move(seeds)}};
  m.body()["datasets"] = Json{{"data", fingerprint_json(prepared.data)}};
  m.timing("forest_seconds", r.forest.wall_seconds);
  if (r.knn) m.timing("knn_seconds", r.knn->wall_seconds);
  Json per_repeat = Json::array();
  for (const auto& row : r.forest.repeats) per_repeat.push_back(row.seconds);
  m.timing("repeat_seconds", std::move(per_repeat));
  std::cout << c.name << ": " << r.forest.metric << " " << r.forest.mean << " +- " << r.forest.std << " over "
            << r.forest.repeats.size() << " repeats";
  if (r.knn) std::cout << "; knn " << r.knn->mean << " +- " << r.knn->std;
  std::cout << "; triplet queries: " << r.forest.triplet_queries + r.forest.cv_queries << "\n";
  m.finish(prefix + ".manifest.json");
}

int cmd_evaluate(Context& ctx, const ExperimentConfig& c, const char* command) {
  Manifest m(ctx, command);
  const PreparedData prepared = prepare_data(c);
  const ExperimentResult r = run_experiment(c, prepared);
  write_experiment(m, c, prepared, r);
  return kOk;
}

int cmd_cv(Context& ctx, const ExperimentConfig& c) {
  Manifest m(ctx, "cv");
  const PreparedData prepared = prepare_data(c);
  const Dataset& data = prepared.data;
  const auto train = prepared.fixed ? prepared.fixed->train : all_items(data.size());
  GridSpec grid = c.grid;
  grid.seed = c.seed;
  ForestParams base = c.forest;
  base.task = c.task;
  const auto t0 = std::chrono::steady_clock::now();
  const CvResult cv = std::visit(
      [&](const auto& o) {
        return cross_validate(train, o, data.responses(), grid, base, resolve_threads(static_cast<int>(c.threads)));
      },
      make_backend(data));
  m.timing("cv_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  const std::string prefix = out_prefix(c);
  Json report{{"name", c.name}, {"metric", metric_name(c.task)}, {"params", to_json(base)}, {"grid", to_json(grid)},
              {"cv", to_json(cv)}};
  m.write_output(prefix + ".json", report.dump(2) + "\n");
  m.write_output(prefix + ".grid.csv", grid_csv(cv.cells, metric_name(c.task)));
  std::cout << c.name << ": best n0 = " << cv.best_n0 << ", M = " << cv.best_trees << ", " << metric_name(c.task)
            << " " << cv.best_score << " over " << cv.cells.size() << " cells; triplet queries: "
            << cv.triplet_queries << "\n";
  m.body()["config"] = c.to_text();
  m.body()["seeds"] = Json{{"seed", c.seed}};
  m.body()["datasets"] = Json{{"data", fingerprint_json(data)}};
  m.finish(prefix + ".manifest.json");
  return kOk;
}

struct SimFlags {
  std::string mode = "both";
  theory::SimConfig sim;
  std::vector<std::uint64_t> ns{1u << 8, 1u << 10, 1u << 12, 1u << 14, 1u << 16};
  std::uint64_t n = 0;
  std::uint32_t trials = 100;
  std::uint32_t k_max = 8;
  double eta = 0.2;
  std::uint32_t test_size = 20000;
  int threads = 0;
  std::string out = "comprf_out/simulate";
};

int cmd_simulate(Context& ctx, SimFlags f) {
  if (f.mode != "both" && f.mode != "halving" && f.mode != "consistency") {
    throw ConfigError("--mode must be halving, consistency or both");
  }
  if (f.n) f.ns = {f.n};
  f.sim.validate();
  Manifest m(ctx, "simulate");
  const unsigned threads = resolve_threads(f.threads);
  const Json params{{"mode", f.mode},
                    {"dim", f.sim.dim},
                    {"alpha", f.sim.alpha},
                    {"witnesses", f.sim.witnesses},
                    {"rejection_limit", f.sim.rejection_limit},
                    {"seed", f.sim.seed},
                    {"trials", f.trials}};
  Json summary = params;
  std::cout.precision(6);
  if (f.mode != "consistency") {
    const auto t0 = std::chrono::steady_clock::now();
    const auto curve = theory::diameter_halving_curve(f.sim, f.k_max, f.trials, threads);
    m.timing("halving_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    const auto fit = theory::fit_log_linear(curve.points);
    const bool monotone = theory::non_increasing_within(curve.points);
    m.write_output(f.out + ".halving.csv", halving_csv(curve));
    summary["halving"] = to_json(curve);
    summary["halving"]["k_max"] = f.k_max;
    summary["halving"]["fit"] = to_json(fit);
    summary["halving"]["non_increasing_within_2se"] = monotone;
    summary["halving"]["estimator_bias"] =
        "witness diameters underestimate true cell diameters, so halving probabilities are biased low";
    std::cout << "halving: slope " << fit.slope << " (upper 95% " << fit.slope_upper95 << "), non-increasing "
              << (monotone ? "yes" : "no") << ", degenerate cells " << curve.degenerate_cells << "\n";
  }
  if (f.mode != "halving") {
    theory::BoxProblem problem;
    problem.eta = f.eta;
    const auto t0 = std::chrono::steady_clock::now();
    const auto points = theory::consistency_trend(f.sim, f.ns, problem, f.trials, f.test_size, threads);
    m.timing("consistency_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    m.write_output(f.out + ".consistency.csv", consistency_csv(points));
    summary["consistency"] = Json{{"eta", f.eta},
                                  {"box", Json::array({problem.lo, problem.hi})},
                                  {"test_size", f.test_size},
                                  {"points", to_json(std::span<const theory::ConsistencyPoint>(points))},
                                  {"strictly_decreasing", theory::strictly_decreasing(points)}};
    for (const auto& p : points) {
      std::cout << "consistency: n " << p.n << " depth " << p.depth << " error " << p.error << " +- "
                << p.std_error << "\n";
    }
  }
  m.write_output(f.out + ".json", summary.dump(2) + "\n");
  m.body()["seeds"] = Json{{"seed", f.sim.seed}};
  m.body()["config"] = params;
  m.finish(f.out + ".manifest.json");
  return kOk;
}

int run_cli(Context& ctx, const std::vector<std::string>& args);

int cmd_replay(const std::string& manifest_path) {
  const Json j = Json::parse(io_detail::read_file(manifest_path), nullptr, false);
  if (j.is_discarded() || !j.contains("argv") || !j.contains("outputs")) {
    throw DataError(manifest_path + ": not a comprf manifest");
  }
  if (j.value("version", "") != std::string(kVersion)) {
    std::cerr << "comprf: warning: manifest written by version " << j.value("version", "?") << "\n";
  }
  const fs::path here = fs::current_path();
  fs::current_path(j.at("cwd").get<std::string>());
  Context replay;
  replay.write_manifest = false;
  const auto args = j.at("argv").get<std::vector<std::string>>();
  const int rc = run_cli(replay, args);
  int mismatches = 0;
  if (rc == kOk) {
    for (const auto& out : j.at("outputs")) {
      const std::string path = out.at("path");
      const std::string want = out.at("fnv1a64");
      const std::string got = fs::exists(path) ? file_digest(path) : "missing";
      if (got != want) {
        std::cerr << "comprf: replay mismatch: " << path << " (" << got << " != " << want << ")\n";
        ++mismatches;
      }
    }
  }
  fs::current_path(here);
  if (rc != kOk) return rc;
  if (mismatches) return kRuntimeExit;
  std::cout << "replay: " << j.at("outputs").size() << " outputs identical\n";
  return kOk;
}

int run_cli(Context& ctx, const std::vector<std::string>& args) {
  ctx.argv = args;
  CLI::App app{"Comparison-based random forests from triplet comparisons", "comprf"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, model_path, queries_path, manifest_path, bench_name;
  std::string data_dir = std::getenv("COMPRF_DATA_DIR") ? std::getenv("COMPRF_DATA_DIR") : COMPRF_DEFAULT_DATA_DIR;
  bool list_benches = false;
  std::deque<FlagSet> sets;

  auto* train = app.add_subcommand("train", "Fit a forest and write a model file");
  auto& train_f = sets.emplace_back();
  data_flags(train, train_f);
  forest_flags(train, train_f);
  run_flags(train, train_f);
  train->add_option("--config", config_path, "Experiment config file");
  train->add_option("--model", model_path, "Model file to write")->required();

  auto* predict_cmd = app.add_subcommand("predict", "Predict with a model file");
  auto& predict_f = sets.emplace_back();
  data_flags(predict_cmd, predict_f);
  predict_f.option(predict_cmd, "--threads", "threads", "Worker threads");
  predict_f.option(predict_cmd, "--out", "out", "Predictions CSV to write");
  predict_cmd->add_option("--config", config_path, "Experiment config file");
  predict_cmd->add_option("--model", model_path, "Model file")->required();
  predict_cmd->add_option("--queries", queries_path,
                          "Header-free numeric CSV of out-of-dataset queries (feature rows, distance rows, or "
                          "kernel rows plus self-kernel); default: every item of --data");

  auto add_eval = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    auto& f = sets.emplace_back();
    data_flags(sub, f);
    forest_flags(sub, f);
    run_flags(sub, f);
    eval_flags(sub, f);
    sub->add_option("--config", config_path, "Experiment config file");
    return std::pair{sub, &f};
  };
  auto [evaluate_cmd, evaluate_f] = add_eval("evaluate", "Repeated seeded train/test evaluation");
  auto [cv_cmd, cv_f] = add_eval("cv", "Cross-validate the (n0, M) grid on the training data");
  auto [bench_cmd, bench_f] = add_eval("bench", "Run a canned benchmark configuration");
  bench_cmd->add_option("bench", bench_name, "Benchmark name");
  bench_cmd->add_option("--data-dir", data_dir, "Directory holding the benchmark data files");
  bench_cmd->add_flag("--list", list_benches, "List benchmark names");

  SimFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo study of the continuous comparison tree");
  simulate->add_option("--mode", sim.mode, "halving, consistency or both");
  simulate->add_option("--alpha", sim.sim.alpha, "Truncation constant, depth = floor(alpha ln n)");
  simulate->add_option("--dim", sim.sim.dim, "Dimension d");
  simulate->add_option("--n", sim.n, "Single sample size for the consistency study");
  simulate->add_option("--ns", sim.ns, "Sample sizes for the consistency study")->delimiter(',');
  simulate->add_option("--trials", sim.trials, "Independent trials");
  simulate->add_option("--k-max", sim.k_max, "Deepest level of the halving curve");
  simulate->add_option("--eta", sim.eta, "Label noise of the box problem");
  simulate->add_option("--test-size", sim.test_size, "Test points per trial");
  simulate->add_option("--witnesses", sim.sim.witnesses, "Witness points per cell");
  simulate->add_option("--rejection-limit", sim.sim.rejection_limit, "Proposals per sample before freezing");
  simulate->add_option("--seed", sim.sim.seed, "Master seed");
  simulate->add_option("--threads", sim.threads, "Worker threads");
  simulate->add_option("--out", sim.out, "Output prefix");

  auto* replay = app.add_subcommand("replay", "Re-run a manifest and verify identical outputs");
  replay->add_option("manifest", manifest_path, "Manifest file")->required();

  std::vector<const char*> cargv{"comprf"};
  for (const auto& a : args) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigExit;
  }

  if (train->parsed()) return cmd_train(ctx, resolve(config_path, train_f), model_path);
  if (predict_cmd->parsed()) {
    ExperimentConfig c = resolve(config_path, predict_f);
    return cmd_predict(ctx, c, model_path, queries_path);
  }
  if (evaluate_cmd->parsed()) return cmd_evaluate(ctx, resolve(config_path, *evaluate_f), "evaluate");
  if (cv_cmd->parsed()) return cmd_cv(ctx, resolve(config_path, *cv_f));
  if (bench_cmd->parsed()) {
    if (list_benches) {
      for (const auto& n : bench_names()) std::cout << n << "\n";
      return kOk;
    }
    if (bench_name.empty()) throw ConfigError("bench needs a benchmark name (see --list)");
    ExperimentConfig c = resolve(config_path, *bench_f, bench_config(bench_name, data_dir));
    return cmd_evaluate(ctx, c, "bench");
  }
  if (simulate->parsed()) return cmd_simulate(ctx, sim);
  if (replay->parsed()) return cmd_replay(manifest_path);
  return kConfigExit;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run_cli(ctx, args);
  } catch (const ConfigError& e) {
    std::cerr << "comprf: config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const TaskMismatchError& e) {
    std::cerr << "comprf: config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const DataError& e) {
    std::cerr << "comprf: data error: " << e.what() << "\n";
    return kDataExit;
  } catch (const std::exception& e) {
    std::cerr << "comprf: error: " << e.what() << "\n";
    return kRuntimeExit;
  }
}
