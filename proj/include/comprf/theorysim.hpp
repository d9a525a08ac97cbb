#pragma once

// Monte-Carlo model of the continuous comparison tree on [0,1]^d with the
// uniform density: every cell draws two pivots uniformly from itself and is
// cut by their bisector. Used to check the diameter-halving behaviour and the
// consistency trend of the truncated tree's majority-vote classifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "comprf/error.hpp"
#include "comprf/eval.hpp"
#include "comprf/matrix.hpp"
#include "comprf/parallel.hpp"
#include "comprf/rng.hpp"

namespace comprf::theory {

struct SimConfig {
  std::uint32_t dim = 2;
  double alpha = 1.0;
  std::uint64_t n = 1024;
  /// Proposals allowed per sample before a cell is declared degenerate.
  std::uint32_t rejection_limit = 100000;
  /// Uniform witness points kept per cell for diameter estimation.
  std::uint32_t witnesses = 64;
  std::uint64_t seed = 0;

  /// Upper end of the admissible truncation constants, 1 / ln 2.
  static constexpr double kAlphaBound = 1.0 / std::numbers::ln2;

  void validate() const {
    if (!(alpha > 0.0 && alpha < kAlphaBound)) {
      throw ConfigError("alpha must satisfy 0 < alpha < 1/log 2 = " + std::to_string(kAlphaBound) +
                        ", got " + std::to_string(alpha));
    }
    if (dim < 1) throw ConfigError("dimension must be at least 1");
    if (n < 1) throw ConfigError("sample size n must be at least 1");
    if (rejection_limit < 1) throw ConfigError("rejection limit must be positive");
    if (witnesses < 2) throw ConfigError("witness count must be at least 2");
  }

  /// Truncation depth floor(alpha * ln n).
  std::uint32_t depth() const {
    return static_cast<std::uint32_t>(std::floor(alpha * std::log(static_cast<double>(n))));
  }
};

/// Closed half-space of points at least as close to `near` as to `far`,
/// stored as normal . x <= offset.
struct HalfSpace {
  std::vector<double> near;
  std::vector<double> far;
  std::vector<double> normal;
  double offset = 0.0;

  static HalfSpace closer_to(std::span<const double> near_pivot, std::span<const double> far_pivot) {
    HalfSpace h;
    h.near.assign(near_pivot.begin(), near_pivot.end());
    h.far.assign(far_pivot.begin(), far_pivot.end());
    h.normal.resize(near_pivot.size());
    double nn = 0.0, ff = 0.0;
    for (std::size_t i = 0; i < near_pivot.size(); ++i) {
      h.normal[i] = 2.0 * (far_pivot[i] - near_pivot[i]);
      nn += near_pivot[i] * near_pivot[i];
      ff += far_pivot[i] * far_pivot[i];
    }
    h.offset = ff - nn;
    return h;
  }

  bool contains(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += normal[i] * x[i];
    return s <= offset;
  }
};

inline constexpr std::uint32_t kNoCell = 0xffffffffu;

struct ContinuousCell {
  std::uint32_t parent = kNoCell;
  std::uint32_t level = 0;
  /// Bisector constraint added by this cell's split (empty for the root).
  std::optional<HalfSpace> constraint;
  /// Axis-aligned box containing the cell; proposals are drawn from it.
  std::vector<double> box_lo;
  std::vector<double> box_hi;
  /// Row-major witness points, each inside the cell.
  std::vector<double> witnesses;
  std::vector<double> left_pivot;
  std::vector<double> right_pivot;
  std::uint32_t left_child = kNoCell;
  std::uint32_t right_child = kNoCell;
  bool degenerate = false;

  bool is_leaf() const noexcept { return left_child == kNoCell; }
};

class ContinuousTree {
 public:
  ContinuousTree(std::uint32_t dim, std::uint32_t depth) : dim_(dim), depth_(depth) {}

  std::uint32_t dim() const noexcept { return dim_; }
  std::uint32_t depth() const noexcept { return depth_; }
  const std::vector<ContinuousCell>& cells() const noexcept { return cells_; }
  std::vector<ContinuousCell>& cells() noexcept { return cells_; }
  const ContinuousCell& cell(std::uint32_t id) const { return cells_[id]; }

  /// The constraint list of a cell: every bisector on its root path.
  std::vector<const HalfSpace*> constraints(std::uint32_t id) const {
    std::vector<const HalfSpace*> out;
    for (std::uint32_t c = id; c != kNoCell; c = cells_[c].parent) {
      if (cells_[c].constraint) out.push_back(&*cells_[c].constraint);
    }
    return out;
  }

  bool contains(std::uint32_t id, std::span<const double> x) const {
    for (double v : x) {
      if (v < 0.0 || v > 1.0) return false;
    }
    for (std::uint32_t c = id; c != kNoCell; c = cells_[c].parent) {
      if (cells_[c].constraint && !cells_[c].constraint->contains(x)) return false;
    }
    return true;
  }

  std::size_t witness_count(std::uint32_t id) const { return cells_[id].witnesses.size() / dim_; }
  std::span<const double> witness(std::uint32_t id, std::size_t k) const {
    return std::span<const double>(cells_[id].witnesses).subspan(k * dim_, dim_);
  }

  /// Leaf cell containing x; points on a bisector follow the left child.
  std::uint32_t locate(std::span<const double> x) const {
    std::uint32_t c = 0;
    while (!cells_[c].is_leaf()) {
      const auto& left = cells_[cells_[c].left_child];
      c = left.constraint->contains(x) ? cells_[c].left_child : cells_[c].right_child;
    }
    return c;
  }

  std::vector<std::uint32_t> cells_at_level(std::uint32_t level) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < cells_.size(); ++i) {
      if (cells_[i].level == level) out.push_back(i);
    }
    return out;
  }

  std::vector<std::uint32_t> leaves() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < cells_.size(); ++i) {
      if (cells_[i].is_leaf()) out.push_back(i);
    }
    return out;
  }

  std::size_t degenerate_count() const {
    std::size_t k = 0;
    for (const auto& c : cells_) k += c.degenerate ? 1 : 0;
    return k;
  }

  /// Uniform point of the cell by rejection from its box; nullopt when the
  /// proposal budget runs out.
  std::optional<std::vector<double>> sample(std::uint32_t id, Rng& rng, std::uint32_t limit) const {
    const auto& c = cells_[id];
    std::vector<double> x(dim_);
    for (std::uint32_t attempt = 0; attempt < limit; ++attempt) {
      for (std::uint32_t i = 0; i < dim_; ++i) {
        x[i] = c.box_lo[i] + (c.box_hi[i] - c.box_lo[i]) * rng.uniform01();
      }
      if (contains(id, x)) return x;
    }
    return std::nullopt;
  }

 private:
  std::uint32_t dim_;
  std::uint32_t depth_;
  std::vector<ContinuousCell> cells_;
};

namespace sim_detail {

/// Shrinks the box to (a superset of) the bounding box of box and
/// {normal . x <= offset}. Returns false when the intersection is empty.
inline bool clip_box(std::vector<double>& lo, std::vector<double>& hi, const HalfSpace& h) {
  const std::size_t d = lo.size();
  for (std::size_t i = 0; i < d; ++i) {
    const double w = h.normal[i];
    if (w == 0.0) continue;
    double rest = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (j != i) rest += std::min(h.normal[j] * lo[j], h.normal[j] * hi[j]);
    }
    const double bound = (h.offset - rest) / w;
    constexpr double kSlack = 1e-12;
    if (w > 0.0) {
      hi[i] = std::min(hi[i], bound + kSlack);
    } else {
      lo[i] = std::max(lo[i], bound - kSlack);
    }
    if (lo[i] > hi[i]) return false;
  }
  return true;
}

inline double max_pairwise(const std::vector<std::span<const double>>& pts) {
  double best = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = a + 1; b < pts.size(); ++b) best = std::max(best, squared_distance(pts[a], pts[b]));
  }
  return std::sqrt(best);
}

}  // namespace sim_detail

/// Grows the truncated continuous tree to `depth` levels. With
/// `keep_witnesses`, each cell holds `witnesses` uniform points: those of its
/// parent that fall inside it, topped up with fresh samples. Cells whose
/// sampling budget runs out are frozen as degenerate leaves.
inline ContinuousTree grow(const SimConfig& config, std::uint32_t depth, bool keep_witnesses = true) {
  config.validate();
  const std::uint32_t d = config.dim;
  ContinuousTree tree(d, depth);
  Rng rng(config.seed);
  auto& cells = tree.cells();
  ContinuousCell root;
  root.box_lo.assign(d, 0.0);
  root.box_hi.assign(d, 1.0);
  cells.push_back(std::move(root));

  auto top_up = [&](std::uint32_t id) {
    const std::size_t want = keep_witnesses ? config.witnesses : 0;
    while (tree.witness_count(id) < want) {
      auto x = tree.sample(id, rng, config.rejection_limit);
      if (!x) {
        cells[id].degenerate = true;
        return;
      }
      cells[id].witnesses.insert(cells[id].witnesses.end(), x->begin(), x->end());
    }
  };
  top_up(0);

  // Level by level so that cells of one level are contiguous.
  std::vector<std::uint32_t> frontier{0};
  for (std::uint32_t level = 0; level < depth; ++level) {
    std::vector<std::uint32_t> next;
    for (const std::uint32_t id : frontier) {
      if (cells[id].degenerate) continue;
      auto p1 = tree.sample(id, rng, config.rejection_limit);
      auto p2 = p1 ? tree.sample(id, rng, config.rejection_limit) : std::nullopt;
      if (!p1 || !p2) {
        cells[id].degenerate = true;
        continue;
      }
      cells[id].left_pivot = *p1;
      cells[id].right_pivot = *p2;
      if (keep_witnesses) {
        cells[id].witnesses.insert(cells[id].witnesses.end(), p1->begin(), p1->end());
        cells[id].witnesses.insert(cells[id].witnesses.end(), p2->begin(), p2->end());
      }
      const std::uint32_t child_ids[2] = {static_cast<std::uint32_t>(cells.size()),
                                          static_cast<std::uint32_t>(cells.size() + 1)};
      for (int side = 0; side < 2; ++side) {
        ContinuousCell child;
        child.parent = id;
        child.level = level + 1;
        child.constraint = side == 0 ? HalfSpace::closer_to(*p1, *p2) : HalfSpace::closer_to(*p2, *p1);
        child.box_lo = cells[id].box_lo;
        child.box_hi = cells[id].box_hi;
        bool nonempty = sim_detail::clip_box(child.box_lo, child.box_hi, *child.constraint);
        for (auto c = id; nonempty && c != kNoCell; c = cells[c].parent) {
          if (cells[c].constraint) nonempty = sim_detail::clip_box(child.box_lo, child.box_hi, *cells[c].constraint);
        }
        if (!nonempty) {
          child.degenerate = true;
          child.box_lo.assign(d, 0.0);
          child.box_hi.assign(d, 0.0);
        }
        cells.push_back(std::move(child));
      }
      cells[id].left_child = child_ids[0];
      cells[id].right_child = child_ids[1];
      for (const auto cid : child_ids) {
        if (cells[cid].degenerate) continue;
        for (std::size_t k = 0; k < tree.witness_count(id); ++k) {
          const auto w = tree.witness(id, k);
          if (cells[cid].constraint->contains(w)) cells[cid].witnesses.insert(cells[cid].witnesses.end(), w.begin(), w.end());
        }
        top_up(cid);
        next.push_back(cid);
      }
    }
    frontier = std::move(next);
  }
  return tree;
}

inline ContinuousTree grow(const SimConfig& config) { return grow(config, config.depth()); }

/// Max pairwise distance among the stored witnesses of a cell; nullopt for
/// degenerate cells.
inline std::optional<double> witness_diameter(const ContinuousTree& tree, std::uint32_t id) {
  if (tree.cell(id).degenerate) return std::nullopt;
  std::vector<std::span<const double>> pts;
  for (std::size_t k = 0; k < tree.witness_count(id); ++k) pts.push_back(tree.witness(id, k));
  if (pts.size() < 2) return std::nullopt;
  return sim_detail::max_pairwise(pts);
}

/// Lower-bound estimate of a cell's diameter: max pairwise distance among
/// `m` fresh uniform samples of the cell plus its stored witnesses.
inline std::optional<double> estimate_diameter(const ContinuousTree& tree, std::uint32_t id,
                                               std::uint32_t m, Rng& rng,
                                               std::uint32_t rejection_limit = 100000) {
  if (m < 2) throw ConfigError("diameter estimation needs at least 2 samples");
  if (tree.cell(id).degenerate) return std::nullopt;
  std::vector<std::vector<double>> fresh;
  for (std::uint32_t k = 0; k < m; ++k) {
    auto x = tree.sample(id, rng, rejection_limit);
    if (!x) return std::nullopt;
    fresh.push_back(std::move(*x));
  }
  std::vector<std::span<const double>> pts;
  for (const auto& x : fresh) pts.emplace_back(x);
  for (std::size_t k = 0; k < tree.witness_count(id); ++k) pts.push_back(tree.witness(id, k));
  return sim_detail::max_pairwise(pts);
}

struct HalvingPoint {
  std::uint32_t k = 0;
  double probability = 0.0;
  double std_error = 0.0;
  std::uint32_t exceed = 0;
  std::uint32_t trials = 0;
};

struct HalvingCurve {
  std::vector<HalvingPoint> points;
  std::uint64_t degenerate_cells = 0;
  double root_diameter = 0.0;
};

/// For k = 0..k_max, the fraction of independent trees in which some
/// depth-k cell has estimated diameter above half the root diameter sqrt(d).
inline HalvingCurve diameter_halving_curve(const SimConfig& config, std::uint32_t k_max,
                                           std::uint32_t trials, unsigned threads = 1) {
  config.validate();
  if (trials < 1) throw ConfigError("trials must be positive");
  const double half = 0.5 * std::sqrt(static_cast<double>(config.dim));
  std::vector<std::vector<std::uint8_t>> exceeded(trials);
  std::vector<std::uint64_t> degenerate(trials, 0);
  parallel_for(trials, threads, [&](std::size_t t) {
    SimConfig c = config;
    c.seed = split_seed(config.seed, t);
    const ContinuousTree tree = grow(c, k_max);
    exceeded[t].assign(k_max + 1, 0);
    for (std::uint32_t id = 0; id < tree.cells().size(); ++id) {
      const auto& cell = tree.cell(id);
      if (exceeded[t][cell.level]) continue;
      if (auto diam = witness_diameter(tree, id); diam && *diam > half) exceeded[t][cell.level] = 1;
    }
    degenerate[t] = tree.degenerate_count();
  });
  HalvingCurve curve;
  curve.root_diameter = 2.0 * half;
  for (auto v : degenerate) curve.degenerate_cells += v;
  for (std::uint32_t k = 0; k <= k_max; ++k) {
    HalvingPoint p;
    p.k = k;
    p.trials = trials;
    for (const auto& e : exceeded) p.exceed += e[k];
    p.probability = static_cast<double>(p.exceed) / trials;
    p.std_error = std::sqrt(p.probability * (1.0 - p.probability) / trials);
    curve.points.push_back(p);
  }
  return curve;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  std::size_t points = 0;
  /// Upper end of the two-sided 95% confidence interval of the slope.
  double slope_upper95 = 0.0;
};

/// Two-sided 97.5% Student-t quantile.
inline double t_quantile_975(std::size_t df) {
  static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262,
                                     2.228,  2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101,
                                     2.093,  2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052,
                                     2.048,  2.045, 2.042};
  if (df == 0) return std::numeric_limits<double>::infinity();
  if (df <= 30) return table[df - 1];
  return 1.96;
}

/// Least-squares fit of log(probability) on k over points with p > 0.
inline LinearFit fit_log_linear(std::span<const HalvingPoint> points) {
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    if (p.probability > 0.0) {
      xs.push_back(p.k);
      ys.push_back(std::log(p.probability));
    }
  }
  LinearFit fit;
  fit.points = xs.size();
  if (xs.size() < 2) {
    fit.slope_upper95 = std::numeric_limits<double>::infinity();
    return fit;
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (xs.size() > 2) {
    double sse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
      sse += r * r;
    }
    fit.slope_se = std::sqrt(sse / (n - 2.0) / sxx);
    fit.slope_upper95 = fit.slope + t_quantile_975(xs.size() - 2) * fit.slope_se;
  } else {
    fit.slope_upper95 = std::numeric_limits<double>::infinity();
  }
  return fit;
}

/// True when p(k+1) <= p(k) + z * SE for every consecutive pair, SE being
/// the standard error of the difference of the two estimates.
inline bool non_increasing_within(std::span<const HalvingPoint> points, double z = 2.0) {
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double se = std::hypot(points[i - 1].std_error, points[i].std_error);
    if (points[i].probability > points[i - 1].probability + z * se) return false;
  }
  return true;
}

/// Noisy box problem: Y is the indicator of [lo, hi]^d flipped with
/// probability eta; its Bayes error is eta.
struct BoxProblem {
  double lo = 0.25;
  double hi = 0.75;
  double eta = 0.2;

  bool clean_label(std::span<const double> x) const {
    for (double v : x) {
      if (v < lo || v > hi) return false;
    }
    return true;
  }
};

struct ConsistencyPoint {
  std::uint64_t n = 0;
  std::uint32_t depth = 0;
  std::uint64_t leaves = 0;
  double leaf_ratio = 0.0;
  double error = 0.0;
  double std_error = 0.0;
  double empty_leaf_fraction = 0.0;
  std::uint64_t degenerate_cells = 0;
};

/// For each n: grow the tree to floor(alpha ln n) levels, drop n labelled
/// samples into the leaves, classify by per-leaf majority (ties -> 1, empty
/// leaves -> 0) and measure P(g(X) != Y) on `test_size` fresh points, using
/// the exact conditional error given X (eta or 1 - eta). Averaged over trials.
inline std::vector<ConsistencyPoint> consistency_trend(const SimConfig& config,
                                                       std::span<const std::uint64_t> ns,
                                                       const BoxProblem& problem, std::uint32_t trials,
                                                       std::uint32_t test_size, unsigned threads = 1) {
  config.validate();
  if (!(problem.eta >= 0.0 && problem.eta < 0.5)) throw ConfigError("label noise must lie in [0, 0.5)");
  if (trials < 1 || test_size < 1) throw ConfigError("trials and test size must be positive");
  std::vector<ConsistencyPoint> out;
  for (std::size_t ni = 0; ni < ns.size(); ++ni) {
    SimConfig c = config;
    c.n = ns[ni];
    c.validate();
    const std::uint32_t depth = c.depth();
    std::vector<double> errors(trials), empty(trials);
    std::vector<std::uint64_t> leaf_counts(trials), degenerate(trials);
    parallel_for(trials, threads, [&](std::size_t t) {
      SimConfig tc = c;
      tc.seed = split_seed(split_seed(config.seed, ni), t);
      const ContinuousTree tree = grow(tc, depth, false);
      Rng rng(split_seed(tc.seed, 0xda7a));
      std::vector<std::int64_t> votes(tree.cells().size(), 0);
      std::vector<std::uint32_t> hits(tree.cells().size(), 0);
      std::vector<double> x(c.dim);
      for (std::uint64_t i = 0; i < c.n; ++i) {
        for (auto& v : x) v = rng.uniform01();
        bool y = problem.clean_label(x);
        if (rng.uniform01() < problem.eta) y = !y;
        const auto leaf = tree.locate(x);
        votes[leaf] += y ? 1 : -1;
        ++hits[leaf];
      }
      double err = 0.0;
      for (std::uint32_t i = 0; i < test_size; ++i) {
        for (auto& v : x) v = rng.uniform01();
        const auto leaf = tree.locate(x);
        const bool g = hits[leaf] > 0 && votes[leaf] >= 0;
        err += g == problem.clean_label(x) ? problem.eta : 1.0 - problem.eta;
      }
      errors[t] = err / test_size;
      const auto leaves = tree.leaves();
      std::size_t empties = 0;
      for (auto l : leaves) empties += hits[l] == 0 ? 1 : 0;
      leaf_counts[t] = leaves.size();
      empty[t] = static_cast<double>(empties) / static_cast<double>(leaves.size());
      degenerate[t] = tree.degenerate_count();
    });
    ConsistencyPoint p;
    p.n = c.n;
    p.depth = depth;
    const auto ms = mean_std(errors);
    p.error = ms.mean;
    p.std_error = ms.std / std::sqrt(static_cast<double>(trials));
    double leaves = 0.0;
    for (auto l : leaf_counts) leaves += static_cast<double>(l);
    p.leaves = static_cast<std::uint64_t>(std::llround(leaves / trials));
    p.leaf_ratio = leaves / trials / static_cast<double>(c.n);
    p.empty_leaf_fraction = mean_std(empty).mean;
    for (auto g : degenerate) p.degenerate_cells += g;
    out.push_back(p);
  }
  return out;
}

inline bool strictly_decreasing(std::span<const ConsistencyPoint> points) {
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].error < points[i - 1].error)) return false;
  }
  return true;
}

}  // namespace comprf::theory
