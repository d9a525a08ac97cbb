#pragma once

// Metrics, cross-validation over (n0, M) grids, the exact KNN baseline and
// repeated train/test evaluation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "comprf/dataset.hpp"
#include "comprf/error.hpp"
#include "comprf/forest.hpp"
#include "comprf/oracle.hpp"
#include "comprf/parallel.hpp"
#include "comprf/rng.hpp"

namespace comprf {

inline double error_rate(std::span<const ClassLabel> predicted, std::span<const ClassLabel> truth) {
  if (predicted.size() != truth.size()) throw ConfigError("error_rate: length mismatch");
  if (predicted.empty()) throw ConfigError("error_rate: no predictions");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) wrong += predicted[i] != truth[i] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

inline double rmse(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw ConfigError("rmse: length mismatch");
  if (predicted.empty()) throw ConfigError("rmse: no predictions");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double r = predicted[i] - truth[i];
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(predicted.size()));
}

struct MeanStd {
  double mean = 0.0;
  /// Sample standard deviation; 0 for a single value.
  double std = 0.0;
};

inline MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

/// Task-appropriate metric of predictions against the responses of `items`:
/// error rate for classification, RMSE for regression.
inline double score(std::span<const Prediction> predictions, std::span<const ItemId> items,
                    const Responses& responses) {
  if (auto* lv = std::get_if<LabelView>(&responses)) {
    std::vector<ClassLabel> pred(predictions.size()), truth(items.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) pred[i] = predictions[i].label;
    for (std::size_t i = 0; i < items.size(); ++i) truth[i] = lv->labels[items[i]];
    return error_rate(pred, truth);
  }
  const auto targets = std::get<std::span<const double>>(responses);
  std::vector<double> pred(predictions.size()), truth(items.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) pred[i] = predictions[i].value;
  for (std::size_t i = 0; i < items.size(); ++i) truth[i] = targets[items[i]];
  return rmse(pred, truth);
}

inline const char* metric_name(TaskKind task) {
  return task == TaskKind::classification ? "error_rate" : "rmse";
}

/// Seeded permutation of `items` chopped into `folds` contiguous blocks whose
/// sizes differ by at most one. With `stratify`, each class is permuted and
/// dealt round-robin so every fold gets its share of every class.
inline std::vector<std::vector<ItemId>> make_folds(std::span<const ItemId> items, std::uint32_t folds,
                                                   std::uint64_t seed,
                                                   const LabelView* stratify = nullptr) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (folds > items.size()) throw ConfigError("more folds than training items");
  Rng rng(seed);
  std::vector<std::vector<ItemId>> out(folds);
  if (stratify) {
    std::vector<std::vector<ItemId>> by_class(stratify->class_count);
    for (auto id : items) by_class[stratify->labels[id]].push_back(id);
    std::size_t dealt = 0;
    for (auto& members : by_class) {
      shuffle(std::span<ItemId>(members), rng);
      for (auto id : members) out[dealt++ % folds].push_back(id);
    }
    return out;
  }
  std::vector<ItemId> perm(items.begin(), items.end());
  shuffle(std::span<ItemId>(perm), rng);
  const std::size_t base = perm.size() / folds;
  const std::size_t extra = perm.size() % folds;
  std::size_t pos = 0;
  for (std::uint32_t f = 0; f < folds; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    out[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                  perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

struct GridSpec {
  std::vector<std::uint32_t> n0s{1, 4, 16, 64};
  std::vector<std::uint32_t> trees{1, 4, 16, 64, 256};
  std::uint32_t folds = 10;
  std::uint64_t seed = 0;
  bool stratified = false;

  void validate() const {
    if (n0s.empty() || trees.empty()) throw ConfigError("grid needs at least one n0 and one M");
    for (auto v : n0s) {
      if (v < 1) throw ConfigError("grid n0 candidates must be >= 1");
    }
    for (auto v : trees) {
      if (v < 1) throw ConfigError("grid M candidates must be >= 1");
    }
    if (folds < 2) throw ConfigError("grid needs at least 2 folds");
  }

  std::size_t cell_count() const { return n0s.size() * trees.size(); }
};

struct GridCell {
  std::uint32_t n0 = 0;
  std::uint32_t trees = 0;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> fold_values;
};

struct CvResult {
  std::uint32_t best_n0 = 0;
  std::uint32_t best_trees = 0;
  double best_score = 0.0;
  /// One cell per (n0, M), n0-major in grid order.
  std::vector<GridCell> cells;
  std::uint64_t triplet_queries = 0;
};

/// k-fold cross-validation of the forest over the (n0, M) grid.
///
/// For each fold and each n0 a single forest with max(M) trees is trained;
/// smaller M are evaluated as tree prefixes, which are exactly the forests
/// fit() would return for those M. The selected cell minimizes the mean fold
/// metric; ties prefer the smaller n0, then the smaller M.
template <TripletOracle O>
CvResult cross_validate(std::span<const ItemId> train, const O& oracle, const Responses& responses,
                        const GridSpec& grid, const ForestParams& base, unsigned threads = 1) {
  grid.validate();
  const LabelView* strat = grid.stratified ? std::get_if<LabelView>(&responses) : nullptr;
  const auto folds = make_folds(train, grid.folds, grid.seed, strat);
  std::vector<std::uint32_t> prefix(grid.trees);
  std::sort(prefix.begin(), prefix.end());
  prefix.erase(std::unique(prefix.begin(), prefix.end()), prefix.end());

  const std::size_t jobs = folds.size() * grid.n0s.size();
  // scores[job][prefix index]
  std::vector<std::vector<double>> scores(jobs);
  std::vector<std::uint64_t> queries(jobs, 0);
  parallel_for(jobs, threads, [&](std::size_t job) {
    const std::size_t f = job / grid.n0s.size();
    const std::uint32_t n0 = grid.n0s[job % grid.n0s.size()];
    std::vector<ItemId> fit_set;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) fit_set.insert(fit_set.end(), folds[g].begin(), folds[g].end());
    }
    ForestParams params = base;
    params.n0 = n0;
    params.trees = prefix.back();
    params.seed = split_seed(grid.seed, f);
    const Forest forest = fit(fit_set, oracle, responses, params);
    std::vector<std::vector<Prediction>> by_prefix(prefix.size());
    std::uint64_t q = forest.build_queries();
    for (auto id : folds[f]) {
      auto preds = predict_prefixes(forest, id, oracle, responses, prefix);
      q += preds.back().triplet_queries;
      for (std::size_t k = 0; k < prefix.size(); ++k) by_prefix[k].push_back(std::move(preds[k]));
    }
    scores[job].resize(prefix.size());
    for (std::size_t k = 0; k < prefix.size(); ++k) scores[job][k] = score(by_prefix[k], folds[f], responses);
    queries[job] = q;
  });

  CvResult result;
  for (auto q : queries) result.triplet_queries += q;
  for (std::size_t a = 0; a < grid.n0s.size(); ++a) {
    for (auto m : grid.trees) {
      const auto k = static_cast<std::size_t>(std::lower_bound(prefix.begin(), prefix.end(), m) - prefix.begin());
      GridCell cell;
      cell.n0 = grid.n0s[a];
      cell.trees = m;
      for (std::size_t f = 0; f < folds.size(); ++f) cell.fold_values.push_back(scores[f * grid.n0s.size() + a][k]);
      const auto ms = mean_std(cell.fold_values);
      cell.mean = ms.mean;
      cell.std = ms.std;
      result.cells.push_back(std::move(cell));
    }
  }
  const GridCell* best = nullptr;
  for (const auto& c : result.cells) {
    const bool better = !best || c.mean < best->mean ||
                        (c.mean == best->mean &&
                         (c.n0 < best->n0 || (c.n0 == best->n0 && c.trees < best->trees)));
    if (better) best = &c;
  }
  result.best_n0 = best->n0;
  result.best_trees = best->trees;
  result.best_score = best->mean;
  return result;
}

// ---------------------------------------------------------------------------
// KNN baseline (needs raw distances, so it is not available from triplets).

namespace knn_detail {

/// Training items sorted by (distance to query, id).
template <DistanceOracle O>
std::vector<std::pair<double, ItemId>> ranked(std::span<const ItemId> train, ItemId query, const O& oracle) {
  std::vector<std::pair<double, ItemId>> r;
  r.reserve(train.size());
  for (auto id : train) r.emplace_back(oracle.distance(query, id), id);
  std::sort(r.begin(), r.end());
  return r;
}

inline Prediction vote(std::span<const std::pair<double, ItemId>> neighbours, const Responses& responses,
                       std::size_t k) {
  Prediction p;
  p.pooled_size = k;
  if (auto* lv = std::get_if<LabelView>(&responses)) {
    std::vector<double> counts(lv->class_count, 0.0);
    std::vector<ClassLabel> present;
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = lv->labels[neighbours[i].second];
      if (counts[c]++ == 0.0) present.push_back(c);
    }
    p.label = forest_detail::plurality(counts, present);
    p.value = p.label;
  } else {
    const auto targets = std::get<std::span<const double>>(responses);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += targets[neighbours[i].second];
    p.value = s / static_cast<double>(k);
  }
  return p;
}

}  // namespace knn_detail

/// Exact k-nearest-neighbour prediction; label ties go to the smaller code,
/// distance ties to the smaller item id.
template <DistanceOracle O>
Prediction knn_predict(std::span<const ItemId> train, ItemId query, const O& oracle,
                       const Responses& responses, std::size_t k) {
  if (k < 1 || k > train.size()) throw ConfigError("knn: k must lie in [1, |train|]");
  const auto r = knn_detail::ranked(train, query, oracle);
  return knn_detail::vote(r, responses, k);
}

struct KnnCvResult {
  std::size_t best_k = 1;
  std::vector<std::pair<std::size_t, double>> scores;
};

/// Chooses k by cross-validation (ties to the smaller k).
template <DistanceOracle O>
KnnCvResult knn_cross_validate(std::span<const ItemId> train, const O& oracle, const Responses& responses,
                               std::span<const std::size_t> candidates, std::uint32_t folds,
                               std::uint64_t seed, unsigned threads = 1) {
  if (candidates.empty()) throw ConfigError("knn: no k candidates");
  const auto parts = make_folds(train, folds, seed);
  std::vector<std::vector<double>> fold_scores(parts.size());
  parallel_for(parts.size(), threads, [&](std::size_t f) {
    std::vector<ItemId> rest;
    for (std::size_t g = 0; g < parts.size(); ++g) {
      if (g != f) rest.insert(rest.end(), parts[g].begin(), parts[g].end());
    }
    std::vector<std::vector<Prediction>> preds(candidates.size());
    for (auto id : parts[f]) {
      const auto r = knn_detail::ranked(rest, id, oracle);
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        preds[c].push_back(knn_detail::vote(r, responses, std::min(candidates[c], rest.size())));
      }
    }
    for (std::size_t c = 0; c < candidates.size(); ++c) fold_scores[f].push_back(score(preds[c], parts[f], responses));
  });
  KnnCvResult out;
  double best = 0.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double s = 0.0;
    for (const auto& fs : fold_scores) s += fs[c];
    s /= static_cast<double>(fold_scores.size());
    out.scores.emplace_back(candidates[c], s);
    if (c == 0 || s < best || (s == best && candidates[c] < out.best_k)) {
      best = s;
      out.best_k = candidates[c];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Repeated evaluation.

struct RepeatResult {
  std::uint32_t repeat = 0;
  std::uint64_t seed = 0;
  double metric = 0.0;
  std::uint32_t n0 = 0;
  std::uint32_t trees = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::uint64_t build_queries = 0;
  std::uint64_t predict_queries = 0;
  std::uint64_t cv_queries = 0;
  double seconds = 0.0;
};

struct EvalReport {
  std::string name;
  std::string method = "comprf";
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  std::vector<RepeatResult> repeats;
  /// Build + predict queries of the evaluated models (CV excluded).
  std::uint64_t triplet_queries = 0;
  std::uint64_t cv_queries = 0;
  double wall_seconds = 0.0;
  ForestParams params;
  GridSpec grid;
  bool cross_validated = false;
  /// CV grid table of the first repeat, when CV ran.
  std::vector<GridCell> first_grid;
  std::size_t item_count = 0;
  std::size_t dimension = 0;
  std::uint64_t fingerprint = 0;
};

struct EvalPlan {
  std::string name;
  ForestParams base;
  GridSpec grid;
  /// Cross-validate each repeat over `grid`; otherwise base.n0/base.trees.
  bool cross_validate = false;
  SplitSpec split;
  std::uint32_t repeats = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

inline void finish_report(EvalReport& report) {
  std::vector<double> values;
  report.triplet_queries = 0;
  report.cv_queries = 0;
  for (const auto& r : report.repeats) {
    values.push_back(r.metric);
    report.triplet_queries += r.build_queries + r.predict_queries;
    report.cv_queries += r.cv_queries;
  }
  const auto ms = mean_std(values);
  report.mean = ms.mean;
  report.std = ms.std;
}

/// Runs `plan.repeats` repeats with seeds seed+0 .. seed+R-1. Each repeat
/// draws a fresh split (unless `fixed` is given), optionally selects (n0, M)
/// by CV on its training part, trains on the whole training part and scores
/// the test part.
template <TripletOracle O>
EvalReport evaluate(const Dataset& data, const O& oracle, const EvalPlan& plan,
                    const std::optional<Split>& fixed = std::nullopt) {
  if (plan.repeats < 1) throw ConfigError("repeat count must be at least 1");
  if (oracle.size() != data.size()) throw DataError("oracle and dataset sizes differ");
  const auto start = std::chrono::steady_clock::now();
  const Responses responses = data.responses();
  ForestParams base = plan.base;
  base.task = data.task();
  base.validate();
  if (plan.cross_validate) plan.grid.validate();

  EvalReport report;
  report.name = plan.name;
  report.metric = metric_name(base.task);
  report.params = base;
  report.grid = plan.grid;
  report.cross_validated = plan.cross_validate;
  report.item_count = data.size();
  report.dimension = data.dimension();
  report.fingerprint = data.fingerprint;

  for (std::uint32_t r = 0; r < plan.repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    RepeatResult row;
    row.repeat = r;
    row.seed = plan.seed + r;
    Split s;
    if (fixed) {
      s = *fixed;
    } else {
      SplitSpec spec = plan.split;
      spec.seed = row.seed;
      s = split(data, spec);
    }
    if (s.test.empty()) throw ConfigError("evaluation needs a non-empty test set");
    ForestParams params = base;
    params.seed = row.seed;
    if (plan.cross_validate) {
      GridSpec grid = plan.grid;
      grid.seed = row.seed;
      const CvResult cv = cross_validate(s.train, oracle, responses, grid, base, plan.threads);
      params.n0 = cv.best_n0;
      params.trees = cv.best_trees;
      row.cv_queries = cv.triplet_queries;
      if (r == 0) report.first_grid = cv.cells;
    }
    const Forest forest = fit(s.train, oracle, responses, params, {plan.threads, data.fingerprint});
    const auto preds = predict_batch(forest, s.test, oracle, responses, plan.threads);
    row.metric = score(preds, s.test, responses);
    row.n0 = params.n0;
    row.trees = params.trees;
    row.train_size = s.train.size();
    row.test_size = s.test.size();
    row.build_queries = forest.build_queries();
    row.predict_queries = total_queries(preds);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.repeats.push_back(row);
  }
  finish_report(report);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// KNN baseline on a fixed split with a given k.
template <DistanceOracle O>
EvalReport knn_baseline(std::span<const ItemId> train, std::span<const ItemId> test, const O& oracle,
                        const Responses& responses, std::size_t k, unsigned threads = 1) {
  if (k < 1 || k > train.size()) throw ConfigError("knn: k must lie in [1, |train|]");
  const auto start = std::chrono::steady_clock::now();
  std::vector<Prediction> preds(test.size());
  parallel_for(test.size(), threads,
               [&](std::size_t i) { preds[i] = knn_predict(train, test[i], oracle, responses, k); });
  EvalReport report;
  report.method = "knn";
  const bool classification = std::holds_alternative<LabelView>(responses);
  report.metric = classification ? "error_rate" : "rmse";
  RepeatResult row;
  row.metric = score(preds, test, responses);
  row.trees = 0;
  row.n0 = static_cast<std::uint32_t>(k);
  row.train_size = train.size();
  row.test_size = test.size();
  report.repeats.push_back(row);
  finish_report(report);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace comprf
