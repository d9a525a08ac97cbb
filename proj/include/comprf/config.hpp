#pragma once

// Experiment configuration: a key = value text file, one setting per line,
// '#' starts a comment. See README.md for the key list.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "comprf/dataset.hpp"
#include "comprf/error.hpp"
#include "comprf/eval.hpp"
#include "comprf/forest.hpp"
#include "comprf/io.hpp"

namespace comprf {

// Enum spellings shared by the config parser, the CLI and the reports.

inline const char* to_string(TaskKind t) { return t == TaskKind::classification ? "classify" : "regress"; }
inline const char* to_string(PivotPolicy p) {
  return p == PivotPolicy::supervised ? "supervised" : "unsupervised";
}
inline const char* to_string(MulticlassRule r) {
  return r == MulticlassRule::one_vs_one ? "one_vs_one" : "plurality";
}
inline const char* to_string(Pooling p) { return p == Pooling::multiset ? "multiset" : "set"; }
inline const char* to_string(Aggregation a) {
  return a == Aggregation::pooled ? "pooled" : "tree_average";
}
inline const char* to_string(SupervisedSampling s) {
  return s == SupervisedSampling::uniform_pair ? "uniform_pair" : "uniform_first";
}

inline TaskKind parse_task(std::string_view s) {
  if (s == "classify" || s == "classification") return TaskKind::classification;
  if (s == "regress" || s == "regression") return TaskKind::regression;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected classify or regress)");
}
inline PivotPolicy parse_policy(std::string_view s) {
  if (s == "supervised") return PivotPolicy::supervised;
  if (s == "unsupervised") return PivotPolicy::unsupervised;
  throw ConfigError("unknown policy '" + std::string(s) + "' (expected supervised or unsupervised)");
}
inline MulticlassRule parse_rule(std::string_view s) {
  if (s == "one_vs_one") return MulticlassRule::one_vs_one;
  if (s == "plurality") return MulticlassRule::plurality;
  throw ConfigError("unknown multiclass rule '" + std::string(s) + "'");
}
inline Pooling parse_pooling(std::string_view s) {
  if (s == "multiset") return Pooling::multiset;
  if (s == "set") return Pooling::set;
  throw ConfigError("unknown pooling '" + std::string(s) + "'");
}
inline Aggregation parse_aggregation(std::string_view s) {
  if (s == "pooled") return Aggregation::pooled;
  if (s == "tree_average") return Aggregation::tree_average;
  throw ConfigError("unknown aggregation '" + std::string(s) + "'");
}
inline SupervisedSampling parse_sampling(std::string_view s) {
  if (s == "uniform_pair") return SupervisedSampling::uniform_pair;
  if (s == "uniform_first") return SupervisedSampling::uniform_first;
  throw ConfigError("unknown supervised sampling '" + std::string(s) + "'");
}

enum class DataFormat : std::uint8_t { csv, libsvm, distmatrix, gram };

inline const char* to_string(DataFormat f) {
  switch (f) {
    case DataFormat::csv: return "csv";
    case DataFormat::libsvm: return "libsvm";
    case DataFormat::distmatrix: return "distmatrix";
    case DataFormat::gram: return "gram";
  }
  return "csv";
}
inline DataFormat parse_format(std::string_view s) {
  if (s == "csv") return DataFormat::csv;
  if (s == "libsvm") return DataFormat::libsvm;
  if (s == "distmatrix") return DataFormat::distmatrix;
  if (s == "gram") return DataFormat::gram;
  throw ConfigError("unknown format '" + std::string(s) + "' (expected csv, libsvm, distmatrix or gram)");
}

namespace config_detail {

inline std::uint64_t to_u64(std::string_view key, std::string_view v) {
  const auto parsed = io_detail::parse_long(v);
  if (!parsed || *parsed < 0) throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  return static_cast<std::uint64_t>(*parsed);
}

inline std::uint32_t to_u32(std::string_view key, std::string_view v) {
  const auto x = to_u64(key, v);
  if (x > 0xffffffffULL) throw ConfigError(std::string(key) + ": value too large");
  return static_cast<std::uint32_t>(x);
}

inline double to_double(std::string_view key, std::string_view v) {
  const auto parsed = io_detail::parse_double(v);
  if (!parsed) throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return *parsed;
}

inline bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

template <class T, class F>
std::vector<T> to_list(std::string_view v, F&& convert) {
  std::vector<T> out;
  for (const auto& cell : io_detail::split_csv(v)) {
    const auto t = io_detail::trim(cell);
    if (!t.empty()) out.push_back(convert(t));
  }
  return out;
}

/// Shortest text that parses back to the same double.
inline std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  return os.str();
}

}  // namespace config_detail

struct ExperimentConfig {
  std::string name = "experiment";
  std::string data;
  DataFormat format = DataFormat::csv;
  /// Response file for distmatrix / gram data.
  std::string labels;
  /// Label column of CSV data: an index (negative counts from the end) or a name.
  std::string label_column = "-1";
  /// Optional fixed test set in the same format as `data`.
  std::string test_data;
  TaskKind task = TaskKind::classification;
  ForestParams forest;
  bool cross_validate = false;
  GridSpec grid;
  SplitSpec split;
  std::uint32_t repeats = 1;
  std::uint64_t seed = 0;
  /// 0 selects COMPRF_THREADS or the hardware concurrency.
  std::uint32_t threads = 0;
  /// Keep only these classes, relabelled 0..k-1 in the listed order.
  std::vector<ClassLabel> classes;
  /// Seeded stratified subsample of this many items (0 keeps all).
  std::uint64_t max_items = 0;
  /// KNN baseline k candidates; more than one selects k by CV.
  std::vector<std::uint32_t> knn;
  /// Output prefix; reports go to <out>.json, <out>.repeats.csv, <out>.grid.csv.
  std::string out;

  void set(std::string_view key, std::string_view value) {
    using namespace config_detail;
    const std::string v(io_detail::trim(value));
    if (key == "name") name = v;
    else if (key == "data") data = v;
    else if (key == "format") format = parse_format(v);
    else if (key == "labels") labels = v;
    else if (key == "label_column") label_column = v;
    else if (key == "test_data") test_data = v;
    else if (key == "task") task = parse_task(v);
    else if (key == "policy") forest.policy = parse_policy(v);
    else if (key == "n0") forest.n0 = to_u32(key, v);
    else if (key == "trees") forest.trees = to_u32(key, v);
    else if (key == "ratio") forest.ratio = to_double(key, v);
    else if (key == "rule") forest.rule = parse_rule(v);
    else if (key == "pooling") forest.pooling = parse_pooling(v);
    else if (key == "aggregation") forest.aggregation = parse_aggregation(v);
    else if (key == "sampling") forest.sampling = parse_sampling(v);
    else if (key == "cv") cross_validate = to_bool(key, v);
    else if (key == "grid_n0") grid.n0s = to_list<std::uint32_t>(v, [&](auto t) { return to_u32(key, t); });
    else if (key == "grid_trees") grid.trees = to_list<std::uint32_t>(v, [&](auto t) { return to_u32(key, t); });
    else if (key == "folds") grid.folds = to_u32(key, v);
    else if (key == "stratified_folds") grid.stratified = to_bool(key, v);
    else if (key == "train_fraction") split.train_fraction = to_double(key, v);
    else if (key == "stratified") split.stratified = to_bool(key, v);
    else if (key == "repeats") repeats = to_u32(key, v);
    else if (key == "seed") seed = to_u64(key, v);
    else if (key == "threads") threads = to_u32(key, v);
    else if (key == "classes") classes = to_list<ClassLabel>(v, [&](auto t) { return to_u32(key, t); });
    else if (key == "max_items") max_items = to_u64(key, v);
    else if (key == "knn") knn = to_list<std::uint32_t>(v, [&](auto t) { return to_u32(key, t); });
    else if (key == "out") out = v;
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
  }

  /// Consistency checks that need no data.
  void validate() const {
    if (data.empty()) throw ConfigError("config names no data file");
    if ((format == DataFormat::distmatrix || format == DataFormat::gram) && labels.empty()) {
      throw ConfigError("distmatrix and gram data need a labels file");
    }
    if (!test_data.empty() && (format == DataFormat::distmatrix || format == DataFormat::gram)) {
      throw ConfigError("a separate test file is only supported for feature data");
    }
    if (!(split.train_fraction > 0.0 && split.train_fraction <= 1.0)) {
      throw ConfigError("train_fraction must lie in (0, 1]");
    }
    if (repeats < 1) throw ConfigError("repeats must be at least 1");
    if (!classes.empty() && task != TaskKind::classification) {
      throw ConfigError("class filtering needs a classification task");
    }
    for (auto k : knn) {
      if (k < 1) throw ConfigError("knn candidates must be at least 1");
    }
    ForestParams p = forest;
    p.task = task;
    p.validate();
    if (cross_validate) grid.validate();
  }

  /// Canonical text form; parse_config(to_text()) reproduces the config.
  std::string to_text() const {
    using config_detail::join;
    using config_detail::shortest;
    std::ostringstream os;
    os << "name = " << name << '\n'
       << "data = " << data << '\n'
       << "format = " << to_string(format) << '\n';
    if (!labels.empty()) os << "labels = " << labels << '\n';
    os << "label_column = " << label_column << '\n';
    if (!test_data.empty()) os << "test_data = " << test_data << '\n';
    os << "task = " << to_string(task) << '\n'
       << "policy = " << to_string(forest.policy) << '\n'
       << "n0 = " << forest.n0 << '\n'
       << "trees = " << forest.trees << '\n'
       << "ratio = " << shortest(forest.ratio) << '\n'
       << "rule = " << to_string(forest.rule) << '\n'
       << "pooling = " << to_string(forest.pooling) << '\n'
       << "aggregation = " << to_string(forest.aggregation) << '\n'
       << "sampling = " << to_string(forest.sampling) << '\n'
       << "cv = " << (cross_validate ? "true" : "false") << '\n'
       << "grid_n0 = " << join(grid.n0s) << '\n'
       << "grid_trees = " << join(grid.trees) << '\n'
       << "folds = " << grid.folds << '\n'
       << "stratified_folds = " << (grid.stratified ? "true" : "false") << '\n'
       << "train_fraction = " << shortest(split.train_fraction) << '\n'
       << "stratified = " << (split.stratified ? "true" : "false") << '\n'
       << "repeats = " << repeats << '\n'
       << "seed = " << seed << '\n'
       << "threads = " << threads << '\n';
    if (!classes.empty()) os << "classes = " << join(classes) << '\n';
    if (max_items) os << "max_items = " << max_items << '\n';
    if (!knn.empty()) os << "knn = " << join(knn) << '\n';
    if (!out.empty()) os << "out = " << out << '\n';
    return os.str();
  }
};

inline ExperimentConfig parse_config(std::string_view text, const std::string& origin = "config") {
  ExperimentConfig config;
  std::size_t line_no = 0;
  for (auto line : io_detail::split_lines(text)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = io_detail::trim(line.substr(0, eq));
    try {
      config.set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace comprf
