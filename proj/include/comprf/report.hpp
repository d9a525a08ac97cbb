#pragma once

// JSON and CSV renderings of evaluation and simulation results. Reports hold
// only deterministic content; wall-clock timings are written to the run
// manifest instead, so repeated runs produce identical report bytes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "comprf/config.hpp"
#include "comprf/error.hpp"
#include "comprf/eval.hpp"
#include "comprf/theorysim.hpp"

namespace comprf {

using Json = nlohmann::ordered_json;

inline Json to_json(const ForestParams& p) {
  return Json{{"trees", p.trees},
              {"n0", p.n0},
              {"ratio", p.ratio},
              {"seed", p.seed},
              {"policy", to_string(p.policy)},
              {"task", to_string(p.task)},
              {"rule", to_string(p.rule)},
              {"pooling", to_string(p.pooling)},
              {"aggregation", to_string(p.aggregation)},
              {"sampling", to_string(p.sampling)}};
}

inline Json to_json(const GridSpec& g) {
  return Json{{"n0", g.n0s}, {"trees", g.trees}, {"folds", g.folds}, {"stratified", g.stratified}};
}

inline Json to_json(const EvalReport& r) {
  Json repeats = Json::array();
  for (const auto& row : r.repeats) {
    repeats.push_back(Json{{"repeat", row.repeat},
                           {"seed", row.seed},
                           {"metric", row.metric},
                           {"n0", row.n0},
                           {"trees", row.trees},
                           {"train_size", row.train_size},
                           {"test_size", row.test_size},
                           {"build_queries", row.build_queries},
                           {"predict_queries", row.predict_queries},
                           {"cv_queries", row.cv_queries}});
  }
  Json j{{"name", r.name},
         {"method", r.method},
         {"metric", r.metric},
         {"mean", r.mean},
         {"std", r.std},
         {"repeat_count", r.repeats.size()},
         {"triplet_queries", r.triplet_queries},
         {"cv_queries", r.cv_queries},
         {"item_count", r.item_count},
         {"dimension", r.dimension},
         {"fingerprint", r.fingerprint},
         {"params", to_json(r.params)},
         {"cross_validated", r.cross_validated}};
  if (r.cross_validated) j["grid"] = to_json(r.grid);
  j["repeats"] = std::move(repeats);
  return j;
}

inline std::string repeats_csv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "repeat,seed," << r.metric
     << ",n0,trees,train_size,test_size,build_queries,predict_queries,cv_queries\n";
  for (const auto& row : r.repeats) {
    os << row.repeat << ',' << row.seed << ',' << row.metric << ',' << row.n0 << ',' << row.trees << ','
       << row.train_size << ',' << row.test_size << ',' << row.build_queries << ',' << row.predict_queries
       << ',' << row.cv_queries << '\n';
  }
  return os.str();
}

inline std::string grid_csv(std::span<const GridCell> cells, const std::string& metric) {
  std::ostringstream os;
  os.precision(17);
  os << "n0,trees,mean_" << metric << ",std_" << metric << '\n';
  for (const auto& c : cells) os << c.n0 << ',' << c.trees << ',' << c.mean << ',' << c.std << '\n';
  return os.str();
}

inline Json to_json(const CvResult& cv) {
  Json cells = Json::array();
  for (const auto& c : cv.cells) {
    cells.push_back(Json{{"n0", c.n0}, {"trees", c.trees}, {"mean", c.mean}, {"std", c.std}, {"folds", c.fold_values}});
  }
  return Json{{"best_n0", cv.best_n0},
              {"best_trees", cv.best_trees},
              {"best_score", cv.best_score},
              {"triplet_queries", cv.triplet_queries},
              {"cells", std::move(cells)}};
}

inline std::string halving_csv(const theory::HalvingCurve& curve) {
  std::ostringstream os;
  os.precision(17);
  os << "k,probability,std_error,exceed,trials\n";
  for (const auto& p : curve.points) {
    os << p.k << ',' << p.probability << ',' << p.std_error << ',' << p.exceed << ',' << p.trials << '\n';
  }
  return os.str();
}

inline std::string consistency_csv(std::span<const theory::ConsistencyPoint> points) {
  std::ostringstream os;
  os.precision(17);
  os << "n,depth,leaves,leaf_ratio,error,std_error,empty_leaf_fraction,degenerate_cells\n";
  for (const auto& p : points) {
    os << p.n << ',' << p.depth << ',' << p.leaves << ',' << p.leaf_ratio << ',' << p.error << ','
       << p.std_error << ',' << p.empty_leaf_fraction << ',' << p.degenerate_cells << '\n';
  }
  return os.str();
}

inline Json to_json(const theory::LinearFit& f) {
  return Json{{"slope", f.slope},
              {"intercept", f.intercept},
              {"slope_se", f.slope_se},
              {"slope_upper95", f.slope_upper95},
              {"points", f.points}};
}

inline Json to_json(const theory::HalvingCurve& curve) {
  Json points = Json::array();
  for (const auto& p : curve.points) {
    points.push_back(Json{{"k", p.k}, {"probability", p.probability}, {"std_error", p.std_error}});
  }
  return Json{{"root_diameter", curve.root_diameter},
              {"degenerate_cells", curve.degenerate_cells},
              {"points", std::move(points)}};
}

inline Json to_json(std::span<const theory::ConsistencyPoint> points) {
  Json out = Json::array();
  for (const auto& p : points) {
    out.push_back(Json{{"n", p.n},
                       {"depth", p.depth},
                       {"leaves", p.leaves},
                       {"leaf_ratio", p.leaf_ratio},
                       {"error", p.error},
                       {"std_error", p.std_error},
                       {"empty_leaf_fraction", p.empty_leaf_fraction},
                       {"degenerate_cells", p.degenerate_cells}});
  }
  return out;
}

/// Writes `content` to `path` via a temporary file and a rename.
inline void write_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace comprf
