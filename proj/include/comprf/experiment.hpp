#pragma once

// Config-driven experiments: data loading and preparation, the repeated
// CompRF evaluation, the KNN baseline on the same splits, and the canned
// benchmark configurations.

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "comprf/config.hpp"
#include "comprf/dataset.hpp"
#include "comprf/eval.hpp"
#include "comprf/io.hpp"
#include "comprf/parallel.hpp"

namespace comprf {

struct PreparedData {
  Dataset data;
  /// Set when the config names a separate test file.
  std::optional<Split> fixed;
};

namespace experiment_detail {

inline LabelColumn label_column(const std::string& spec) {
  if (const auto idx = io_detail::parse_long(spec)) return *idx;
  return spec;
}

inline Dataset load_one(const ExperimentConfig& c, const std::string& path) {
  switch (c.format) {
    case DataFormat::csv: return load_csv(path, label_column(c.label_column), c.task);
    case DataFormat::libsvm: return load_libsvm(path, c.task);
    case DataFormat::distmatrix: return load_pairwise(path, c.labels, Representation::distances, c.task);
    case DataFormat::gram: return load_pairwise(path, c.labels, Representation::gram, c.task);
  }
  throw ConfigError("unknown data format");
}

/// Rows of `a` followed by rows of `b`; label codes of `b` are translated
/// into the code space of `a` by class name.
inline Dataset concatenate(const Dataset& a, const Dataset& b) {
  if (!a.has_features() || !b.has_features()) throw DataError("train and test data must both be feature data");
  const std::size_t d = std::max(a.dimension(), b.dimension());
  Matrix m(a.size() + b.size(), d);
  for (std::size_t r = 0; r < a.size(); ++r) {
    auto src = a.values->row(r);
    std::copy(src.begin(), src.end(), m.row(r).begin());
  }
  for (std::size_t r = 0; r < b.size(); ++r) {
    auto src = b.values->row(r);
    std::copy(src.begin(), src.end(), m.row(a.size() + r).begin());
  }
  Dataset out;
  out.item_count = a.size() + b.size();
  out.representation = Representation::features;
  out.values = std::make_shared<const Matrix>(std::move(m));
  if (a.labels && b.labels) {
    std::vector<ClassLabel> labels(*a.labels);
    out.class_names = a.class_names;
    if (a.class_names.empty() != b.class_names.empty()) {
      throw DataError("train and test labels use different encodings");
    }
    for (auto code : *b.labels) {
      if (b.class_names.empty()) {
        labels.push_back(code);
        continue;
      }
      const auto& name = b.class_names[code];
      auto it = std::find(out.class_names.begin(), out.class_names.end(), name);
      if (it == out.class_names.end()) {
        out.class_names.push_back(name);
        it = out.class_names.end() - 1;
      }
      labels.push_back(static_cast<ClassLabel>(it - out.class_names.begin()));
    }
    out.labels = std::move(labels);
  } else if (a.targets && b.targets) {
    std::vector<double> t(*a.targets);
    t.insert(t.end(), b.targets->begin(), b.targets->end());
    out.targets = std::move(t);
  } else {
    throw DataError("train and test data carry different response kinds");
  }
  out.finalize();
  return out;
}

}  // namespace experiment_detail

/// Keeps the listed classes and relabels them 0..k-1 in the listed order.
inline Dataset filter_classes(const Dataset& data, std::span<const ClassLabel> classes) {
  if (!data.labels) throw DataError("class filtering needs a labelled dataset");
  std::vector<ItemId> keep;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (std::find(classes.begin(), classes.end(), (*data.labels)[i]) != classes.end()) {
      keep.push_back(static_cast<ItemId>(i));
    }
  }
  if (keep.empty()) throw DataError("no items belong to the requested classes");
  Dataset out = data.subset(keep);
  std::vector<std::string> names;
  for (auto c : classes) names.push_back(c < data.class_names.size() ? data.class_names[c] : std::to_string(c));
  for (auto& l : *out.labels) {
    l = static_cast<ClassLabel>(std::find(classes.begin(), classes.end(), l) - classes.begin());
  }
  out.class_names = std::move(names);
  out.class_count = static_cast<std::uint32_t>(classes.size());
  out.finalize();
  return out;
}

/// Loads and prepares the data of an experiment. Class filtering and the
/// item cap apply to feature data without a separate test file.
inline PreparedData prepare_data(const ExperimentConfig& config) {
  config.validate();
  PreparedData out;
  out.data = experiment_detail::load_one(config, config.data);
  if (!config.test_data.empty()) {
    const Dataset test = experiment_detail::load_one(config, config.test_data);
    const std::size_t train_n = out.data.size();
    out.data = experiment_detail::concatenate(out.data, test);
    Split s;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      (i < train_n ? s.train : s.test).push_back(static_cast<ItemId>(i));
    }
    out.fixed = std::move(s);
  }
  if (out.fixed && (!config.classes.empty() || config.max_items)) {
    throw ConfigError("classes and max_items cannot be combined with a fixed test file");
  }
  if (!config.classes.empty()) out.data = filter_classes(out.data, config.classes);
  if (config.max_items && config.max_items < out.data.size()) {
    SplitSpec spec;
    spec.train_fraction = static_cast<double>(config.max_items) / static_cast<double>(out.data.size());
    spec.stratified = out.data.labels.has_value();
    spec.seed = split_seed(config.seed, 0x5b5e7);
    auto keep = split(out.data, spec).train;
    std::sort(keep.begin(), keep.end());
    out.data = out.data.subset(keep);
  }
  return out;
}

struct ExperimentResult {
  EvalReport forest;
  std::optional<EvalReport> knn;
};

inline EvalPlan make_plan(const ExperimentConfig& config) {
  EvalPlan plan;
  plan.name = config.name;
  plan.base = config.forest;
  plan.base.task = config.task;
  plan.grid = config.grid;
  plan.cross_validate = config.cross_validate;
  plan.split = config.split;
  plan.repeats = config.repeats;
  plan.seed = config.seed;
  plan.threads = resolve_threads(static_cast<int>(config.threads));
  return plan;
}

/// KNN on the same per-repeat splits as `evaluate`. With several k
/// candidates, k is chosen per repeat by CV on the training part.
template <DistanceOracle O>
EvalReport knn_evaluate(const Dataset& data, const O& oracle, const EvalPlan& plan,
                        std::span<const std::uint32_t> candidates, const std::optional<Split>& fixed) {
  const Responses responses = data.responses();
  EvalReport report;
  report.name = plan.name;
  report.method = "knn";
  report.metric = metric_name(data.task());
  report.item_count = data.size();
  report.dimension = data.dimension();
  report.fingerprint = data.fingerprint;
  std::vector<std::size_t> ks(candidates.begin(), candidates.end());
  for (std::uint32_t r = 0; r < plan.repeats; ++r) {
    Split s;
    if (fixed) {
      s = *fixed;
    } else {
      SplitSpec spec = plan.split;
      spec.seed = plan.seed + r;
      s = split(data, spec);
    }
    std::size_t k = ks.front();
    if (ks.size() > 1) {
      k = knn_cross_validate(s.train, oracle, responses, ks, plan.grid.folds, plan.seed + r, plan.threads).best_k;
    }
    EvalReport one = knn_baseline(s.train, s.test, oracle, responses, std::min(k, s.train.size()), plan.threads);
    RepeatResult row = one.repeats.front();
    row.repeat = r;
    row.seed = plan.seed + r;
    report.repeats.push_back(row);
  }
  finish_report(report);
  return report;
}

/// Runs an experiment: CompRF over `repeats` seeded splits and, when the
/// config lists KNN candidates, the KNN baseline on the same splits.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const PreparedData& prepared) {
  const EvalPlan plan = make_plan(config);
  const Backend backend = make_backend(prepared.data);
  ExperimentResult result;
  std::visit(
      [&](const auto& oracle) {
        result.forest = evaluate(prepared.data, oracle, plan, prepared.fixed);
        if (!config.knn.empty()) result.knn = knn_evaluate(prepared.data, oracle, plan, config.knn, prepared.fixed);
      },
      backend);
  return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, prepare_data(config));
}

/// Names accepted by bench_config.
inline const std::vector<std::string>& bench_names() {
  static const std::vector<std::string> names{
      "boston", "mnist2", "mnist5k", "mnist5k-unsupervised", "gisette", "gisette-unsupervised",
      "ucihar", "ucihar-unsupervised"};
  return names;
}

/// Canned desk-scale benchmark configurations. Data files are looked up in
/// `data_dir`: boston_housing.csv, mnist_5k.csv.gz, gisette_scale and
/// gisette_scale.t (libsvm), ucihar.csv (label last).
inline ExperimentConfig bench_config(const std::string& name, const std::string& data_dir) {
  const auto path = [&](const char* file) { return (std::filesystem::path(data_dir) / file).string(); };
  ExperimentConfig c;
  c.name = name;
  c.seed = 1;
  c.repeats = 10;
  const std::string unsup_suffix = "-unsupervised";
  const bool unsupervised = name.size() > unsup_suffix.size() &&
                            name.compare(name.size() - unsup_suffix.size(), unsup_suffix.size(), unsup_suffix) == 0;
  const std::string base = unsupervised ? name.substr(0, name.size() - unsup_suffix.size()) : name;
  if (base == "boston") {
    if (unsupervised) throw ConfigError("unknown bench '" + name + "'");
    c.data = path("boston_housing.csv");
    c.task = TaskKind::regression;
    c.forest.policy = PivotPolicy::unsupervised;
    c.cross_validate = true;
    c.split.train_fraction = 0.9;
  } else if (base == "mnist2") {
    if (unsupervised) throw ConfigError("unknown bench '" + name + "'");
    c.data = path("mnist_5k.csv.gz");
    c.classes = {0, 1};
    c.max_items = 1000;
    c.forest.trees = 256;
    c.forest.n0 = 1;
    c.split.train_fraction = 0.5;
    c.knn = {1, 3, 5, 7, 9};
  } else if (base == "mnist5k") {
    c.data = path("mnist_5k.csv.gz");
    c.forest.trees = 32;
    c.forest.n0 = 1;
    c.split.train_fraction = 0.9;
  } else if (base == "gisette") {
    c.data = path("gisette_scale");
    c.test_data = path("gisette_scale.t");
    c.format = DataFormat::libsvm;
    c.cross_validate = true;
  } else if (base == "ucihar") {
    c.data = path("ucihar.csv");
    c.max_items = 4000;
    c.cross_validate = true;
    c.split.train_fraction = 0.9;
  } else {
    throw ConfigError("unknown bench '" + name + "'");
  }
  if (unsupervised) c.forest.policy = PivotPolicy::unsupervised;
  return c;
}

}  // namespace comprf
