#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "comprf/dataset.hpp"

using namespace comprf;

namespace {

Dataset labelled(std::vector<ClassLabel> labels, std::size_t d = 2) {
  Dataset ds;
  ds.item_count = labels.size();
  Matrix m(labels.size(), d);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) m(i, j) = static_cast<double>(i * d + j);
  }
  ds.values = std::make_shared<const Matrix>(std::move(m));
  ds.labels = std::move(labels);
  ds.finalize();
  return ds;
}

Dataset regression(std::size_t n) {
  Dataset ds;
  ds.item_count = n;
  ds.values = std::make_shared<const Matrix>(Matrix(n, 1));
  ds.targets = std::vector<double>(n, 1.5);
  ds.finalize();
  return ds;
}

}  // namespace

TEST(Dataset, InfersClassCount) {
  EXPECT_EQ(labelled({0, 1, 0}).class_count, 2u);
}

TEST(Dataset, InvariantViolations) {
  Dataset both = labelled({0, 1});
  both.targets = std::vector<double>{1.0, 2.0};
  EXPECT_THROW(both.finalize(), DataError);

  Dataset bad_label = labelled({0, 1});
  bad_label.class_count = 1;
  EXPECT_THROW(bad_label.finalize(), DataError);

  Dataset empty;
  EXPECT_THROW(empty.finalize(), DataError);
}

TEST(Dataset, FingerprintIgnoresSignOfZero) {
  Dataset a = labelled({0, 1});
  Dataset b = a;
  Matrix m = *a.values;
  m(0, 0) = -0.0;
  b.values = std::make_shared<const Matrix>(m);
  b.finalize();
  EXPECT_EQ(a.fingerprint, b.fingerprint);
  Matrix changed = *a.values;
  changed(0, 0) = 1e-300;
  b.values = std::make_shared<const Matrix>(changed);
  b.finalize();
  EXPECT_NE(a.fingerprint, b.fingerprint);
}

TEST(Dataset, SubsetCopiesRowsAndResponses) {
  const Dataset ds = labelled({0, 1, 2, 1});
  const std::vector<ItemId> keep{3, 0};
  const Dataset sub = ds.subset(keep);
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ((*sub.labels)[0], 1u);
  EXPECT_DOUBLE_EQ((*sub.values)(0, 0), (*ds.values)(3, 0));
  EXPECT_EQ(sub.class_count, 3u);
}

TEST(Split, SizesAndDeterminism) {
  const Dataset ds = labelled({0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  const Split a = split(ds, {0.9, false, 1});
  EXPECT_EQ(a.train.size(), 9u);
  EXPECT_EQ(a.test.size(), 1u);
  const Split again = split(ds, {0.9, false, 1});
  EXPECT_EQ(a.train, again.train);
  const Split b = split(ds, {0.9, false, 2});
  EXPECT_EQ(b.train.size(), 9u);
  EXPECT_NE(a.train, b.train);
}

TEST(Split, PartitionOverManySeeds) {
  const Dataset ds = labelled(std::vector<ClassLabel>(37, 0));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (bool stratified : {false, true}) {
      const Split s = split(ds, {0.7, stratified, seed});
      std::vector<ItemId> all = s.train;
      all.insert(all.end(), s.test.begin(), s.test.end());
      std::sort(all.begin(), all.end());
      ASSERT_EQ(all, all_items(37)) << seed;
    }
  }
}

TEST(Split, StratifiedProportions) {
  // 6 x A, 4 x B at fraction 0.5: exactly 3 A and 2 B in train.
  const Dataset ds = labelled({0, 0, 0, 0, 0, 0, 1, 1, 1, 1});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Split s = split(ds, {0.5, true, seed});
    std::size_t a = 0, b = 0;
    for (auto id : s.train) ((*ds.labels)[id] == 0 ? a : b) += 1;
    EXPECT_EQ(a, 3u);
    EXPECT_EQ(b, 2u);
  }
}

TEST(Split, StratifiedWithinOneItemPerClass) {
  std::vector<ClassLabel> labels;
  for (ClassLabel c = 0; c < 5; ++c) labels.insert(labels.end(), 3 + 4 * c, c);
  const Dataset ds = labelled(labels);
  std::vector<std::size_t> sizes(5, 0);
  for (auto l : labels) ++sizes[l];
  for (double f : {0.1, 0.33, 0.5, 0.77, 0.9}) {
    const Split s = split(ds, {f, true, 3});
    std::vector<std::size_t> got(5, 0);
    for (auto id : s.train) ++got[labels[id]];
    EXPECT_EQ(s.train.size(), static_cast<std::size_t>(std::floor(f * labels.size() + 1e-9)));
    for (std::size_t c = 0; c < 5; ++c) EXPECT_LE(std::abs(static_cast<double>(got[c]) - f * sizes[c]), 1.0);
  }
}

TEST(Split, Errors) {
  EXPECT_THROW(split(regression(10), {0.5, true, 0}), ConfigError);
  EXPECT_THROW(split(regression(10), {0.0, false, 0}), ConfigError);
  EXPECT_THROW(split(regression(10), {1.5, false, 0}), ConfigError);
  EXPECT_THROW(split(regression(10), {0.05, false, 0}), ConfigError);
}

TEST(Subsample, IdentityCountAndDeterminism) {
  const auto ids = all_items(100);
  EXPECT_EQ(subsample(ids, 1.0, 5), ids);
  const auto half = subsample(ids, 0.5, 5);
  EXPECT_EQ(half.size(), 50u);
  EXPECT_EQ(std::set<ItemId>(half.begin(), half.end()).size(), 50u);
  EXPECT_TRUE(std::is_sorted(half.begin(), half.end()));
  EXPECT_EQ(subsample(ids, 0.5, 5), half);
  EXPECT_THROW(subsample(ids, 0.001, 5), ConfigError);
  EXPECT_THROW(subsample(ids, 0.0, 5), ConfigError);
}

TEST(Subsample, InclusionFrequencyIsBinomial) {
  const auto ids = all_items(40);
  const double r = 0.3;
  const std::size_t k = 12;
  const int seeds = 4000;
  std::vector<int> hits(40, 0);
  for (int s = 0; s < seeds; ++s) {
    for (auto id : subsample(ids, r, static_cast<std::uint64_t>(s) * 7919)) ++hits[id];
  }
  const double p = static_cast<double>(k) / 40.0;
  const double sigma = std::sqrt(p * (1 - p) / seeds);
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / seeds, p, 3.0 * sigma);
}
