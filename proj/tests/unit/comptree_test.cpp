#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "comprf/comptree.hpp"

using namespace comprf;

namespace {

std::vector<std::vector<double>> uniform_points(std::size_t n, std::size_t d, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> pts(n, std::vector<double>(d));
  for (auto& p : pts) {
    for (auto& x : p) x = u(gen);
  }
  return pts;
}

std::vector<ItemId> sorted(std::span<const ItemId> s) {
  std::vector<ItemId> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<ItemId> leaf_items(const CompTree& t, std::uint32_t leaf) {
  auto s = t.items(leaf);
  return {s.begin(), s.end()};
}

// Recomputes the split cost from the structure alone.
std::uint64_t expected_build_queries(const CompTree& t) {
  std::uint64_t q = 0;
  for (const auto& n : t.nodes) {
    if (!n.is_leaf()) q += n.count - 2;
  }
  return q;
}

template <class T>
std::pair<T, T> unordered(T a, T b) {
  return a < b ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace

TEST(BuildTree, SmallSetIsSingleLeaf) {
  const CountingOracle o(EuclideanOracle(uniform_points(5, 2, 1)));
  const auto ids = all_items(5);
  const CompTree t = build_tree(ids, o, nullptr, {5, 0, PivotPolicy::unsupervised});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_TRUE(t.root().is_leaf());
  EXPECT_EQ(sorted(t.items(0)), ids);
  EXPECT_EQ(o.stats().query_count, 0u);
  EXPECT_EQ(t.build_queries, 0u);
}

TEST(BuildTree, CollinearExampleWithTieGoingLeft) {
  // Points 0,1,2,3 on a line. Search seeds until pivots {0, 3} are drawn.
  const EuclideanOracle o(std::vector<std::vector<double>>{{0.0}, {1.0}, {2.0}, {3.0}});
  const auto ids = all_items(4);
  bool seen = false;
  for (std::uint64_t seed = 0; seed < 200 && !seen; ++seed) {
    const CompTree t = build_tree(ids, o, nullptr, {2, seed, PivotPolicy::unsupervised});
    const auto& root = t.root();
    if (unordered(root.left_pivot, root.right_pivot) != std::pair<ItemId, ItemId>{0, 3}) continue;
    seen = true;
    const auto left = sorted(t.items(root.left_child));
    const auto right = sorted(t.items(root.right_child));
    if (root.left_pivot == 0) {
      EXPECT_EQ(left, (std::vector<ItemId>{0, 1}));
      EXPECT_EQ(right, (std::vector<ItemId>{2, 3}));
    } else {
      EXPECT_EQ(left, (std::vector<ItemId>{2, 3}));
      EXPECT_EQ(right, (std::vector<ItemId>{0, 1}));
    }
  }
  EXPECT_TRUE(seen);
}

TEST(BuildTree, MidpointTieGoesToLeftPivot) {
  // Item 1 is equidistant from items 0 and 2; it must follow the left pivot.
  const EuclideanOracle o(std::vector<std::vector<double>>{{0.0}, {1.0}, {2.0}});
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const CompTree t = build_tree(all_items(3), o, nullptr, {1, seed, PivotPolicy::unsupervised});
    const auto& root = t.root();
    if (unordered(root.left_pivot, root.right_pivot) != std::pair<ItemId, ItemId>{0, 2}) continue;
    const auto left = leaf_items(t, root.left_child);
    EXPECT_NE(std::find(left.begin(), left.end(), 1u), left.end());
  }
}

TEST(BuildTree, FullDepthLeavesAndAccounting) {
  const CountingOracle o(EuclideanOracle(uniform_points(100, 2, 2)));
  const CompTree t = build_tree(all_items(100), o, nullptr, {1, 9, PivotPolicy::unsupervised});
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) {
      EXPECT_EQ(n.count, 1u);
    }
  }
  EXPECT_EQ(t.leaf_count(), 100u);
  EXPECT_EQ(o.stats().query_count, expected_build_queries(t));
  EXPECT_EQ(t.build_queries, o.stats().query_count);
}

TEST(BuildTree, StructuralInvariantsWithDuplicates) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + gen() % 60;
    auto pts = uniform_points(n, 1 + gen() % 3, static_cast<unsigned>(trial));
    // Heavy duplication: snap to a coarse grid.
    for (auto& p : pts) {
      for (auto& x : p) x = std::round(x * 2.0) / 2.0;
    }
    std::vector<ClassLabel> labels(n);
    for (auto& l : labels) l = static_cast<ClassLabel>(gen() % 3);
    const LabelView lv{labels, 3};
    const EuclideanOracle o(pts);
    const BuildParams params{static_cast<std::uint32_t>(1 + gen() % 4), gen(),
                             trial % 2 ? PivotPolicy::supervised : PivotPolicy::unsupervised};
    const CompTree t = build_tree(all_items(n), o, &lv, params);
    ASSERT_EQ(sorted(t.members), all_items(n));
    for (const auto& node : t.nodes) {
      if (node.is_leaf()) {
        EXPECT_GE(node.count, 1u);
        EXPECT_LE(node.count, params.n0);
        continue;
      }
      const auto& l = t.nodes[node.left_child];
      const auto& r = t.nodes[node.right_child];
      EXPECT_EQ(l.begin, node.begin);
      EXPECT_EQ(r.begin, l.begin + l.count);
      EXPECT_EQ(l.count + r.count, node.count);
      EXPECT_GE(l.count, 1u);
      EXPECT_GE(r.count, 1u);
      EXPECT_NE(node.left_pivot, node.right_pivot);
      const auto li = t.items(l);
      const auto ri = t.items(r);
      EXPECT_NE(std::find(li.begin(), li.end(), node.left_pivot), li.end());
      EXPECT_NE(std::find(ri.begin(), ri.end(), node.right_pivot), ri.end());
    }
  }
}

TEST(BuildTree, AllIdenticalPointsTerminate) {
  const EuclideanOracle o(std::vector<std::vector<double>>(64, std::vector<double>{0.5, 0.5}));
  const CompTree t = build_tree(all_items(64), o, nullptr, {1, 4, PivotPolicy::unsupervised});
  EXPECT_EQ(t.leaf_count(), 64u);
  // Every non-pivot tie goes left, so the tree degenerates into a chain.
  EXPECT_EQ(t.max_depth(), 63u);
}

TEST(BuildTree, LeavesLieInsidePivotHalfSpaces) {
  const auto pts = uniform_points(120, 3, 5);
  const EuclideanOracle o(pts);
  const CompTree t = build_tree(all_items(120), o, nullptr, {3, 17, PivotPolicy::unsupervised});
  auto dist2 = [&](ItemId a, ItemId b) {
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) s += (pts[a][i] - pts[b][i]) * (pts[a][i] - pts[b][i]);
    return s;
  };
  for (const auto& node : t.nodes) {
    if (node.is_leaf()) continue;
    for (auto id : t.items(node.left_child)) {
      if (id != node.left_pivot) {
        EXPECT_LE(dist2(id, node.left_pivot), dist2(id, node.right_pivot));
      }
    }
    for (auto id : t.items(node.right_child)) {
      if (id != node.right_pivot) {
        EXPECT_GT(dist2(id, node.left_pivot), dist2(id, node.right_pivot));
      }
    }
  }
}

TEST(BuildTree, SeedDeterminismAndSeedSensitivity) {
  const EuclideanOracle o(uniform_points(80, 2, 6));
  const auto ids = all_items(80);
  const BuildParams p{2, 42, PivotPolicy::unsupervised};
  EXPECT_EQ(build_tree(ids, o, nullptr, p), build_tree(ids, o, nullptr, p));
  BuildParams q = p;
  q.seed = 43;
  EXPECT_NE(build_tree(ids, o, nullptr, p), build_tree(ids, o, nullptr, q));
}

TEST(BuildTree, Errors) {
  const EuclideanOracle o(uniform_points(4, 2, 7));
  const std::vector<ItemId> none;
  EXPECT_THROW(build_tree(none, o, nullptr, {1, 0, PivotPolicy::unsupervised}), ConfigError);
  EXPECT_THROW(build_tree(all_items(4), o, nullptr, {0, 0, PivotPolicy::unsupervised}), ConfigError);
  EXPECT_THROW(build_tree(all_items(4), o, nullptr, {1, 0, PivotPolicy::supervised}), ConfigError);
}

TEST(SelectPivots, OnlyValidPairIsAlwaysChosen) {
  const std::vector<ClassLabel> labels{0, 1};
  const LabelView lv{labels, 2};
  const std::vector<ItemId> s{0, 1};
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto c = select_pivots(s, &lv, PivotPolicy::supervised, SupervisedSampling::uniform_pair, rng);
    EXPECT_EQ(unordered(c.left, c.right), (std::pair<std::size_t, std::size_t>{0, 1}));
  }
}

TEST(SelectPivots, SupervisedPairsAreUniformOverDifferingPairs) {
  // Labels (0,0,1): pairs {x1,x3} and {x2,x3} each with probability 1/2.
  const std::vector<ClassLabel> labels{0, 0, 1};
  const LabelView lv{labels, 2};
  const std::vector<ItemId> s{0, 1, 2};
  for (auto sampling : {SupervisedSampling::uniform_pair, SupervisedSampling::uniform_first}) {
    Rng rng(2);
    const int trials = 20000;
    int with_first = 0, left_is_third = 0;
    for (int i = 0; i < trials; ++i) {
      const auto c = select_pivots(s, &lv, PivotPolicy::supervised, sampling, rng);
      const auto [a, b] = unordered(c.left, c.right);
      ASSERT_EQ(b, 2u);
      with_first += a == 0 ? 1 : 0;
      left_is_third += c.left == 2 ? 1 : 0;
    }
    const double sigma = std::sqrt(0.25 / trials);
    EXPECT_NEAR(with_first / double(trials), 0.5, 3 * sigma);
    EXPECT_NEAR(left_is_third / double(trials), 0.5, 3 * sigma);
  }
}

TEST(SelectPivots, UniformPairUnderImbalance) {
  // Labels 0,0,0,1,2: differing pairs are {i,3},{i,4} for i<3 and {3,4}: 7 pairs.
  const std::vector<ClassLabel> labels{0, 0, 0, 1, 2};
  const LabelView lv{labels, 3};
  const std::vector<ItemId> s{0, 1, 2, 3, 4};
  Rng rng(3);
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  const int trials = 70000;
  for (int i = 0; i < trials; ++i) {
    const auto c = select_pivots(s, &lv, PivotPolicy::supervised, SupervisedSampling::uniform_pair, rng);
    ++counts[unordered(c.left, c.right)];
  }
  ASSERT_EQ(counts.size(), 7u);
  const double p = 1.0 / 7.0, sigma = std::sqrt(p * (1 - p) / trials);
  for (const auto& [pair, k] : counts) {
    EXPECT_NE(labels[pair.first], labels[pair.second]);
    EXPECT_NEAR(k / double(trials), p, 3.5 * sigma);
  }
}

TEST(SelectPivots, SingleClassFallsBackToUniformPair) {
  const std::vector<ClassLabel> labels(4, 0);
  const LabelView lv{labels, 1};
  const std::vector<ItemId> s{0, 1, 2, 3};
  Rng rng(4);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (int i = 0; i < 500; ++i) {
    const auto c = select_pivots(s, &lv, PivotPolicy::supervised, SupervisedSampling::uniform_pair, rng);
    EXPECT_NE(c.left, c.right);
    seen.insert(unordered(c.left, c.right));
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(SelectPivots, UnsupervisedIgnoresLabels) {
  const std::vector<ClassLabel> labels{0, 0, 1};
  const LabelView lv{labels, 2};
  const std::vector<ItemId> s{0, 1, 2};
  Rng rng(5);
  bool same_label_pair = false;
  for (int i = 0; i < 200; ++i) {
    const auto c = select_pivots(s, &lv, PivotPolicy::unsupervised, SupervisedSampling::uniform_pair, rng);
    same_label_pair |= unordered(c.left, c.right) == std::pair<std::size_t, std::size_t>{0, 1};
  }
  EXPECT_TRUE(same_label_pair);
  Rng r2(6);
  EXPECT_THROW(select_pivots(std::vector<ItemId>{0}, nullptr, PivotPolicy::unsupervised,
                             SupervisedSampling::uniform_pair, r2),
               ConfigError);
}

TEST(Traverse, SingleLeafAndDepthAccounting) {
  const auto pts = uniform_points(50, 2, 8);
  CountingOracle o{EuclideanOracle(pts)};
  const CompTree one = build_tree(all_items(50), o, nullptr, {50, 0, PivotPolicy::unsupervised});
  const auto bound = o.with_query(std::vector<double>{0.5, 0.5});
  o.reset();
  EXPECT_EQ(traverse(one, kQueryItem, bound).depth, 0u);
  EXPECT_EQ(o.stats().query_count, 0u);

  const CompTree t = build_tree(all_items(50), o, nullptr, {1, 3, PivotPolicy::unsupervised});
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    const auto q = o.with_query(std::vector<double>{u(gen), u(gen)});
    o.reset();
    const Traversal tr = traverse(t, kQueryItem, q);
    EXPECT_EQ(o.stats().query_count, tr.depth);
    EXPECT_TRUE(t.nodes[tr.leaf].is_leaf());
  }
}

TEST(Traverse, TrainingPointReachesItsOwnLeaf) {
  const auto pts = uniform_points(60, 3, 10);  // continuous: distances distinct
  const EuclideanOracle o(pts);
  const CompTree t = build_tree(all_items(60), o, nullptr, {1, 11, PivotPolicy::unsupervised});
  for (ItemId id = 0; id < 60; ++id) {
    const auto leaf = traverse(t, id, o).leaf;
    EXPECT_EQ(leaf_items(t, leaf), std::vector<ItemId>{id});
  }
}

TEST(Traverse, MatrixBackendWithoutQueryRowFails) {
  Matrix d(3, 3);
  d(0, 1) = d(1, 0) = 1;
  d(0, 2) = d(2, 0) = 2;
  d(1, 2) = d(2, 1) = 1.5;
  const DistanceMatrixOracle o(d);
  const CompTree t = build_tree(all_items(3), o, nullptr, {1, 0, PivotPolicy::unsupervised});
  EXPECT_THROW(traverse(t, kQueryItem, o), DataError);
}
