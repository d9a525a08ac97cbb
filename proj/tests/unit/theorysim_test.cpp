#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "comprf/theorysim.hpp"

using namespace comprf;
using namespace comprf::theory;

namespace {

SimConfig config(std::uint32_t dim, std::uint64_t seed) {
  SimConfig c;
  c.dim = dim;
  c.seed = seed;
  return c;
}

double box_diagonal(const ContinuousCell& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.box_lo.size(); ++i) s += (c.box_hi[i] - c.box_lo[i]) * (c.box_hi[i] - c.box_lo[i]);
  return std::sqrt(s);
}

}  // namespace

TEST(SimConfig, AlphaBoundAndDepth) {
  SimConfig c;
  c.alpha = 1.44;
  EXPECT_NO_THROW(c.validate());
  c.alpha = SimConfig::kAlphaBound;
  EXPECT_THROW(c.validate(), ConfigError);
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.alpha = 1.0;
  c.n = 1;
  EXPECT_EQ(c.depth(), 0u);
  c.n = 1u << 16;
  EXPECT_EQ(c.depth(), 11u);
}

TEST(Grow, DepthZeroIsTheRootCell) {
  SimConfig c = config(2, 1);
  c.n = 1;
  const ContinuousTree t = grow(c);
  ASSERT_EQ(t.cells().size(), 1u);
  EXPECT_TRUE(t.cell(0).is_leaf());
  EXPECT_EQ(t.witness_count(0), 64u);
  EXPECT_EQ(t.locate(std::vector<double>{0.3, 0.9}), 0u);
}

TEST(Grow, OneDimensionalSplitAtPivotMidpoint) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ContinuousTree t = grow(config(1, seed), 1);
    const auto& root = t.cell(0);
    ASSERT_FALSE(root.is_leaf());
    const double mid = 0.5 * (root.left_pivot[0] + root.right_pivot[0]);
    const double lo = std::min(root.left_pivot[0], root.right_pivot[0]);
    const auto& near_lo = root.left_pivot[0] == lo ? t.cell(root.left_child) : t.cell(root.right_child);
    const auto& near_hi = root.left_pivot[0] == lo ? t.cell(root.right_child) : t.cell(root.left_child);
    EXPECT_NEAR(near_lo.box_lo[0], 0.0, 1e-12);
    EXPECT_NEAR(near_lo.box_hi[0], mid, 1e-9);
    EXPECT_NEAR(near_hi.box_lo[0], mid, 1e-9);
    EXPECT_NEAR(near_hi.box_hi[0], 1.0, 1e-12);
  }
}

TEST(Grow, LevelsDoubleAndNest) {
  const ContinuousTree t = grow(config(2, 3), 6);
  EXPECT_EQ(t.degenerate_count(), 0u);
  for (std::uint32_t level = 0; level <= 6; ++level) EXPECT_EQ(t.cells_at_level(level).size(), 1u << level);
  EXPECT_EQ(t.leaves().size(), 64u);
  for (std::uint32_t id = 1; id < t.cells().size(); ++id) {
    const auto& c = t.cell(id);
    const auto& p = t.cell(c.parent);
    EXPECT_EQ(c.level, p.level + 1);
    EXPECT_EQ(t.constraints(id).size(), c.level);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_GE(c.box_lo[i], p.box_lo[i]);
      EXPECT_LE(c.box_hi[i], p.box_hi[i]);
    }
  }
}

TEST(Grow, WitnessesLieInTheirCell) {
  const ContinuousTree t = grow(config(3, 4), 5);
  for (std::uint32_t id = 0; id < t.cells().size(); ++id) {
    EXPECT_EQ(t.witness_count(id) >= 64u, !t.cell(id).degenerate);
    for (std::size_t k = 0; k < t.witness_count(id); ++k) {
      const auto w = t.witness(id, k);
      EXPECT_TRUE(t.contains(id, w));
      for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_GE(w[i], t.cell(id).box_lo[i] - 1e-12);
        EXPECT_LE(w[i], t.cell(id).box_hi[i] + 1e-12);
      }
    }
    if (!t.cell(id).is_leaf()) {
      EXPECT_TRUE(t.contains(id, t.cell(id).left_pivot));
      EXPECT_TRUE(t.contains(id, t.cell(id).right_pivot));
    }
  }
}

TEST(Grow, LeavesPartitionTheCube) {
  const ContinuousTree t = grow(config(2, 5), 7);
  const auto leaves = t.leaves();
  Rng rng(99);
  std::vector<std::uint32_t> counts(t.cells().size(), 0);
  for (int i = 0; i < 4000; ++i) {
    const std::vector<double> x{rng.uniform01(), rng.uniform01()};
    std::size_t holders = 0;
    for (auto l : leaves) holders += t.contains(l, x) ? 1 : 0;
    EXPECT_EQ(holders, 1u);
    const auto leaf = t.locate(x);
    EXPECT_TRUE(t.contains(leaf, x));
    for (auto c = leaf; c != kNoCell; c = t.cell(c).parent) ++counts[c];
  }
  // Mass of every split cell equals the mass of its two children.
  for (std::uint32_t id = 0; id < t.cells().size(); ++id) {
    const auto& c = t.cell(id);
    if (!c.is_leaf()) {
      EXPECT_EQ(counts[id], counts[c.left_child] + counts[c.right_child]);
    }
  }
  EXPECT_EQ(counts[0], 4000u);
}

TEST(Grow, SameSeedSameTree) {
  const ContinuousTree a = grow(config(2, 6), 4);
  const ContinuousTree b = grow(config(2, 6), 4);
  ASSERT_EQ(a.cells().size(), b.cells().size());
  for (std::uint32_t id = 0; id < a.cells().size(); ++id) {
    EXPECT_EQ(a.cell(id).left_pivot, b.cell(id).left_pivot);
    EXPECT_EQ(a.cell(id).witnesses, b.cell(id).witnesses);
  }
}

TEST(Diameter, RootEstimateConvergesToUnitSquareDiagonal) {
  // The shortfall of a max-pairwise estimate shrinks like 1/sqrt(m): about
  // 6% at m = 256 and under 2% at m = 4096 on the unit square.
  SimConfig c = config(2, 7);
  c.n = 1;
  const ContinuousTree t = grow(c);
  const double diag = std::sqrt(2.0);
  double coarse = 0.0, fine = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(s);
    const double a = *estimate_diameter(t, 0, 256, rng);
    const double b = *estimate_diameter(t, 0, 4096, rng);
    EXPECT_LE(a, diag);
    EXPECT_GT(a, 0.9 * diag);
    EXPECT_GT(b, 0.95 * diag);
    coarse += diag - a;
    fine += diag - b;
  }
  EXPECT_LT(fine, coarse);
  Rng rng(1);
  EXPECT_THROW(estimate_diameter(t, 0, 1, rng), ConfigError);
}

TEST(Diameter, InheritedWitnessesNeverWiden) {
  const ContinuousTree t = grow(config(2, 15), 6);
  for (std::uint32_t id = 1; id < t.cells().size(); ++id) {
    const auto parent = t.cell(id).parent;
    std::vector<std::span<const double>> inherited;
    for (std::size_t k = 0; k < t.witness_count(parent); ++k) {
      if (t.contains(id, t.witness(parent, k))) inherited.push_back(t.witness(parent, k));
    }
    EXPECT_LE(sim_detail::max_pairwise(inherited), *witness_diameter(t, parent));
  }
}

TEST(Diameter, IntervalEstimateAndCellBounds) {
  SimConfig c = config(1, 9);
  c.n = 1;
  const ContinuousTree line = grow(c);
  Rng rng(10);
  EXPECT_GT(*estimate_diameter(line, 0, 256, rng), 0.95);
  const ContinuousTree t = grow(config(3, 11), 6);
  for (std::uint32_t id = 0; id < t.cells().size(); ++id) {
    const auto w = witness_diameter(t, id);
    const auto e = estimate_diameter(t, id, 16, rng);
    ASSERT_TRUE(w && e);
    EXPECT_LE(*w, *e);
    EXPECT_LE(*e, box_diagonal(t.cell(id)) + 1e-9);
    EXPECT_LE(*e, std::sqrt(3.0));
  }
}

TEST(Halving, CurveShapeAndDeterminism) {
  const SimConfig c = config(2, 12);
  const auto curve = diameter_halving_curve(c, 8, 40);
  ASSERT_EQ(curve.points.size(), 9u);
  EXPECT_DOUBLE_EQ(curve.points[0].probability, 1.0);
  EXPECT_DOUBLE_EQ(curve.points[0].std_error, 0.0);
  EXPECT_LT(curve.points[8].probability, curve.points[2].probability);
  EXPECT_DOUBLE_EQ(curve.root_diameter, std::sqrt(2.0));
  const auto again = diameter_halving_curve(c, 8, 40, 3);
  for (std::size_t k = 0; k < 9; ++k) EXPECT_EQ(curve.points[k].exceed, again.points[k].exceed);
}

TEST(LogLinearFit, ExactExponential) {
  std::vector<HalvingPoint> pts;
  for (std::uint32_t k = 0; k < 6; ++k) pts.push_back({k, std::pow(0.5, k), 0.0, 0, 1});
  pts.push_back({6, 0.0, 0.0, 0, 1});
  const auto fit = fit_log_linear(pts);
  EXPECT_EQ(fit.points, 6u);
  EXPECT_NEAR(fit.slope, -std::log(2.0), 1e-12);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-12);
  EXPECT_NEAR(fit.slope_se, 0.0, 1e-9);
  EXPECT_NEAR(fit.slope_upper95, fit.slope, 1e-8);
  EXPECT_TRUE(std::isinf(fit_log_linear(std::span(pts).subspan(0, 2)).slope_upper95));
}

TEST(LogLinearFit, StudentQuantiles) {
  EXPECT_DOUBLE_EQ(t_quantile_975(1), 12.706);
  EXPECT_DOUBLE_EQ(t_quantile_975(5), 2.571);
  EXPECT_DOUBLE_EQ(t_quantile_975(30), 2.042);
  EXPECT_DOUBLE_EQ(t_quantile_975(500), 1.96);
}

TEST(Consistency, LeafRatioShrinksAndNoiselessErrorIsSmall) {
  const SimConfig c = config(2, 13);
  const std::vector<std::uint64_t> ns{1u << 8, 1u << 12, 1u << 16};
  BoxProblem clean;
  clean.eta = 0.0;
  const auto pts = consistency_trend(c, ns, clean, 2, 5000);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_GT(pts[0].leaf_ratio, pts[1].leaf_ratio);
  EXPECT_GT(pts[1].leaf_ratio, pts[2].leaf_ratio);
  for (const auto& p : pts) {
    EXPECT_EQ(p.depth, static_cast<std::uint32_t>(std::floor(std::log(static_cast<double>(p.n)))));
    EXPECT_LE(p.leaves, 1u << p.depth);
  }
  EXPECT_LT(pts[2].error, 0.05);
}

TEST(Consistency, NoisyErrorStaysAboveBayes) {
  const SimConfig c = config(2, 14);
  const std::vector<std::uint64_t> ns{1u << 10};
  const auto pts = consistency_trend(c, ns, BoxProblem{}, 3, 4000);
  EXPECT_GE(pts[0].error, 0.2);
  EXPECT_LT(pts[0].error, 0.5);
  BoxProblem bad;
  bad.eta = 0.5;
  EXPECT_THROW(consistency_trend(c, ns, bad, 1, 10), ConfigError);
}
