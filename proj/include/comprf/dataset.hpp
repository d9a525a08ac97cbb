#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "comprf/error.hpp"
#include "comprf/matrix.hpp"
#include "comprf/oracle.hpp"
#include "comprf/rng.hpp"

namespace comprf {

using ClassLabel = std::uint32_t;

/// Class labels are dense codes below this bound.
inline constexpr std::uint32_t kMaxClasses = 1u << 16;

enum class TaskKind : std::uint8_t { classification = 0, regression = 1 };

/// How the items of a dataset are related to each other.
enum class Representation : std::uint8_t { features = 0, distances = 1, gram = 2 };

/// Read-only view on class labels indexed by item id.
struct LabelView {
  std::span<const ClassLabel> labels;
  std::uint32_t class_count = 0;
};

/// Responses of the training items: labels for classification, real targets
/// for regression.
using Responses = std::variant<LabelView, std::span<const double>>;

/// 64-bit FNV-1a accumulator over numeric values.
class Fingerprinter {
 public:
  void add_u64(std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (v >> (8 * i)) & 0xffu;
      hash_ *= 0x100000001b3ULL;
    }
  }
  void add_double(double v) noexcept {
    if (v == 0.0) v = 0.0;  // -0.0 and 0.0 hash alike
    add_u64(std::bit_cast<std::uint64_t>(v));
  }
  std::uint64_t value() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

/// Items with an optional feature matrix or pairwise matrix and optional
/// labels or targets. Immutable once built; share via const reference.
struct Dataset {
  std::size_t item_count = 0;
  Representation representation = Representation::features;
  /// n x d features, or n x n distances / kernel values.
  std::shared_ptr<const Matrix> values;
  std::optional<std::vector<ClassLabel>> labels;
  std::optional<std::vector<double>> targets;
  std::uint32_t class_count = 0;
  /// Original label strings in code order, when labels were not integers.
  std::vector<std::string> class_names;
  std::uint64_t fingerprint = 0;

  std::size_t size() const noexcept { return item_count; }
  bool has_features() const noexcept { return representation == Representation::features && values; }
  std::size_t dimension() const noexcept { return has_features() ? values->cols() : 0; }

  TaskKind task() const {
    if (labels) return TaskKind::classification;
    if (targets) return TaskKind::regression;
    throw DataError("dataset has neither labels nor targets");
  }

  LabelView label_view() const {
    if (!labels) throw TaskMismatchError("dataset has no class labels");
    return {*labels, class_count};
  }

  Responses responses() const {
    if (labels) return label_view();
    if (targets) return std::span<const double>(*targets);
    throw DataError("dataset has neither labels nor targets");
  }

  /// Recomputes the content hash from the parsed values.
  std::uint64_t compute_fingerprint() const {
    Fingerprinter f;
    f.add_u64(item_count);
    f.add_u64(static_cast<std::uint64_t>(representation));
    if (values) {
      f.add_u64(values->rows());
      f.add_u64(values->cols());
      for (double v : values->data()) f.add_double(v);
    }
    if (labels) {
      f.add_u64(1);
      f.add_u64(class_count);
      for (auto l : *labels) f.add_u64(l);
    }
    if (targets) {
      f.add_u64(2);
      for (double t : *targets) f.add_double(t);
    }
    return f.value();
  }

  /// Checks the structural invariants and stores the fingerprint.
  void finalize() {
    if (item_count == 0) throw DataError("dataset is empty");
    if (values) {
      const bool square = representation != Representation::features;
      if (values->rows() != item_count || (square && values->cols() != item_count)) {
        throw DataError("dataset value matrix does not match the item count");
      }
    }
    if (labels && targets) throw DataError("dataset has both labels and targets");
    if (labels) {
      if (labels->size() != item_count) throw DataError("label count does not match item count");
      if (class_count == 0) {
        for (auto l : *labels) class_count = std::max(class_count, l + 1);
      }
      if (class_count > kMaxClasses) throw DataError("too many classes");
      for (auto l : *labels) {
        if (l >= class_count) throw DataError("class label exceeds class count");
      }
    }
    if (targets && targets->size() != item_count) {
      throw DataError("target count does not match item count");
    }
    fingerprint = compute_fingerprint();
  }

  /// Copy of the given items (features and responses), for subsetting
  /// feature datasets.
  Dataset subset(std::span<const ItemId> items) const {
    if (representation != Representation::features) {
      throw DataError("subset is only defined for feature datasets");
    }
    Dataset out;
    out.item_count = items.size();
    out.representation = representation;
    if (values) {
      Matrix m(items.size(), values->cols());
      for (std::size_t i = 0; i < items.size(); ++i) {
        auto src = values->row(items[i]);
        std::copy(src.begin(), src.end(), m.row(i).begin());
      }
      out.values = std::make_shared<const Matrix>(std::move(m));
    }
    if (labels) {
      std::vector<ClassLabel> l(items.size());
      for (std::size_t i = 0; i < items.size(); ++i) l[i] = (*labels)[items[i]];
      out.labels = std::move(l);
      out.class_count = class_count;
      out.class_names = class_names;
    }
    if (targets) {
      std::vector<double> t(items.size());
      for (std::size_t i = 0; i < items.size(); ++i) t[i] = (*targets)[items[i]];
      out.targets = std::move(t);
    }
    out.finalize();
    return out;
  }
};

/// Oracle backend matching the dataset's representation.
inline Backend make_backend(const Dataset& data) {
  if (!data.values) throw DataError("dataset carries no features or pairwise values");
  switch (data.representation) {
    case Representation::features:
      return EuclideanOracle(data.values);
    case Representation::distances:
      return DistanceMatrixOracle(data.values);
    case Representation::gram:
      return GramOracle(*data.values);
  }
  throw DataError("unknown representation");
}

inline std::vector<ItemId> all_items(std::size_t n) {
  std::vector<ItemId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<ItemId>(i);
  return ids;
}

struct SplitSpec {
  double train_fraction = 0.9;
  bool stratified = false;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<ItemId> train;
  std::vector<ItemId> test;
};

namespace detail {

/// floor(fraction * n), robust to representation error in the product.
inline std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace detail

/// Seeded train/test split. Train size is floor(train_fraction * n). The
/// stratified variant rounds each class with the largest-remainder rule, so
/// every class is within one item of its exact share.
inline Split split(const Dataset& data, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1]");
  }
  const std::size_t n = data.size();
  const std::size_t n_train = detail::fraction_count(spec.train_fraction, n);
  if (n_train == 0) throw ConfigError("train fraction leaves an empty training set");
  Rng rng(spec.seed);
  Split out;
  if (!spec.stratified) {
    auto perm = all_items(n);
    shuffle(std::span<ItemId>(perm), rng);
    out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    return out;
  }
  if (!data.labels) throw ConfigError("stratified split requires class labels");
  std::vector<std::vector<ItemId>> by_class(data.class_count);
  for (std::size_t i = 0; i < n; ++i) by_class[(*data.labels)[i]].push_back(static_cast<ItemId>(i));

  std::vector<std::size_t> take(by_class.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double exact = spec.train_fraction * static_cast<double>(by_class[c].size());
    take[c] = detail::fraction_count(spec.train_fraction, by_class[c].size());
    assigned += take[c];
    remainders.emplace_back(exact - static_cast<double>(take[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n_train && i < remainders.size(); ++i) {
    const std::size_t c = remainders[i].second;
    if (take[c] < by_class[c].size()) {
      ++take[c];
      ++assigned;
    }
  }
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    shuffle(std::span<ItemId>(by_class[c]), rng);
    out.train.insert(out.train.end(), by_class[c].begin(),
                     by_class[c].begin() + static_cast<std::ptrdiff_t>(take[c]));
    out.test.insert(out.test.end(), by_class[c].begin() + static_cast<std::ptrdiff_t>(take[c]),
                    by_class[c].end());
  }
  shuffle(std::span<ItemId>(out.train), rng);
  shuffle(std::span<ItemId>(out.test), rng);
  return out;
}

/// floor(ratio * |indices|) distinct indices drawn uniformly without
/// replacement, returned in their input order. ratio = 1 is the identity.
inline std::vector<ItemId> subsample(std::span<const ItemId> indices, double ratio,
                                     std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("subsampling ratio must lie in (0, 1]");
  if (ratio == 1.0) return {indices.begin(), indices.end()};
  const std::size_t k = detail::fraction_count(ratio, indices.size());
  if (k == 0) throw ConfigError("subsampling ratio leaves an empty subsample");
  std::vector<std::size_t> pos(indices.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(pos.size() - i));
    std::swap(pos[i], pos[j]);
  }
  std::sort(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<ItemId> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = indices[pos[i]];
  return out;
}

}  // namespace comprf
