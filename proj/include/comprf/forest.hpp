#pragma once

// Comparison-based random forest: M comparison trees, each on a seeded
// subsample of the training items. A prediction pools the members of the
// leaves reached in every tree and votes (classification) or averages
// (regression) over the pooled responses.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "comprf/comptree.hpp"
#include "comprf/dataset.hpp"
#include "comprf/error.hpp"
#include "comprf/oracle.hpp"
#include "comprf/parallel.hpp"
#include "comprf/rng.hpp"

namespace comprf {

enum class MulticlassRule : std::uint8_t { one_vs_one = 0, plurality = 1 };

/// Multiset pooling counts an item once per tree that reached it; set
/// pooling counts it once.
enum class Pooling : std::uint8_t { multiset = 0, set = 1 };

/// `pooled` votes over the pooled leaf members; `tree_average` averages the
/// per-tree leaf estimates (class frequencies or target means).
enum class Aggregation : std::uint8_t { pooled = 0, tree_average = 1 };

struct ForestParams {
  std::uint32_t trees = 1;
  std::uint32_t n0 = 1;
  double ratio = 1.0;
  std::uint64_t seed = 0;
  PivotPolicy policy = PivotPolicy::supervised;
  TaskKind task = TaskKind::classification;
  MulticlassRule rule = MulticlassRule::one_vs_one;
  Pooling pooling = Pooling::multiset;
  Aggregation aggregation = Aggregation::pooled;
  SupervisedSampling sampling = SupervisedSampling::uniform_pair;

  void validate() const {
    if (trees < 1) throw ConfigError("tree count M must be at least 1");
    if (n0 < 1) throw ConfigError("leaf size n0 must be at least 1");
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("subsampling ratio r must lie in (0, 1]");
    if (task == TaskKind::regression && policy == PivotPolicy::supervised) {
      throw ConfigError("regression forests use unsupervised pivot selection");
    }
  }

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct Forest {
  ForestParams params;
  std::vector<CompTree> trees;
  /// Training items, in the order given to fit.
  std::vector<ItemId> train;
  /// Per-tree subsamples; empty when ratio = 1 (the subsample is `train`).
  std::vector<std::vector<ItemId>> subsamples;
  std::uint64_t fingerprint = 0;
  std::uint64_t item_count = 0;
  std::uint32_t class_count = 0;

  std::span<const ItemId> subsample(std::size_t tree) const {
    if (subsamples.empty()) return train;
    return subsamples[tree];
  }

  std::uint64_t build_queries() const {
    std::uint64_t total = 0;
    for (const auto& t : trees) total += t.build_queries;
    return total;
  }

  friend bool operator==(const Forest&, const Forest&) = default;
};

struct Prediction {
  ClassLabel label = 0;
  double value = 0.0;
  /// Sum of the sizes of the reached leaves.
  std::uint64_t pooled_size = 0;
  std::uint64_t triplet_queries = 0;
  std::vector<std::uint32_t> per_tree_leaf_sizes;
};

struct FitOptions {
  unsigned threads = 1;
  /// Fingerprint of the dataset the oracle and responses come from.
  std::uint64_t fingerprint = 0;
};

namespace forest_detail {

inline std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t tree) {
  return split_seed(forest_seed, tree);
}

inline void check_responses(TaskKind task, const Responses& responses) {
  const bool has_labels = std::holds_alternative<LabelView>(responses);
  if (task == TaskKind::classification && !has_labels) {
    throw TaskMismatchError("classification forest given regression targets");
  }
  if (task == TaskKind::regression && has_labels) {
    throw TaskMismatchError("regression forest given class labels");
  }
}

/// Highest score wins; ties go to the smaller class code.
inline ClassLabel plurality(std::span<const double> scores, std::span<const ClassLabel> present) {
  ClassLabel best = present.front();
  for (auto c : present) {
    if (scores[c] > scores[best] || (scores[c] == scores[best] && c < best)) best = c;
  }
  return best;
}

/// Every unordered class pair is a duel: larger score wins one point, equal
/// scores split it. The class with most points wins, ties by plurality then
/// smaller code. Absent classes score 0 and can never beat a present class,
/// and they add the same number of points to every present class, so only
/// present classes need to be compared.
inline ClassLabel one_vs_one(std::span<const double> scores, std::span<const ClassLabel> present) {
  ClassLabel best = present.front();
  double best_points = -1.0;
  for (auto a : present) {
    double points = 0.0;
    for (auto b : present) {
      if (a == b) continue;
      if (scores[a] > scores[b]) points += 1.0;
      else if (scores[a] == scores[b]) points += 0.5;
    }
    const bool better = points > best_points ||
                        (points == best_points &&
                         (scores[a] > scores[best] || (scores[a] == scores[best] && a < best)));
    if (better) {
      best = a;
      best_points = points;
    }
  }
  return best;
}

}  // namespace forest_detail

/// Class decision over a score vector indexed by class code. Two-class
/// problems use a plain majority vote, ties toward the smaller code.
inline ClassLabel decide_class(std::span<const double> scores, std::span<const ClassLabel> present,
                               std::uint32_t class_count, MulticlassRule rule) {
  if (present.empty()) throw std::logic_error("no class to vote for");
  if (class_count <= 2 || rule == MulticlassRule::plurality) {
    return forest_detail::plurality(scores, present);
  }
  return forest_detail::one_vs_one(scores, present);
}

/// Accumulates leaves tree by tree and can produce the forest decision after
/// any number of trees.
class LeafPool {
 public:
  LeafPool(const ForestParams& params, const Responses& responses, std::uint32_t class_count)
      : params_(params), responses_(responses) {
    forest_detail::check_responses(params.task, responses);
    if (auto* lv = std::get_if<LabelView>(&responses_)) {
      class_count_ = std::max(class_count, lv->class_count);
      scores_.assign(class_count_, 0.0);
    }
  }

  void add_leaf(std::span<const ItemId> leaf, std::uint32_t depth) {
    queries_ += depth;
    pooled_size_ += leaf.size();
    leaf_sizes_.push_back(static_cast<std::uint32_t>(leaf.size()));
    const bool average = params_.aggregation == Aggregation::tree_average;
    if (auto* lv = std::get_if<LabelView>(&responses_)) {
      if (average) {
        const double w = 1.0 / static_cast<double>(leaf.size());
        for (auto id : leaf) bump(lv->labels[id], w);
      } else if (params_.pooling == Pooling::multiset) {
        for (auto id : leaf) bump(lv->labels[id], 1.0);
      } else {
        items_.insert(items_.end(), leaf.begin(), leaf.end());
      }
    } else {
      const auto targets = std::get<std::span<const double>>(responses_);
      if (average) {
        double s = 0.0;
        for (auto id : leaf) s += targets[id];
        sum_ += s / static_cast<double>(leaf.size());
        weight_ += 1.0;
      } else if (params_.pooling == Pooling::multiset) {
        for (auto id : leaf) sum_ += targets[id];
        weight_ += static_cast<double>(leaf.size());
      } else {
        items_.insert(items_.end(), leaf.begin(), leaf.end());
      }
    }
  }

  Prediction result() const {
    Prediction p;
    p.pooled_size = pooled_size_;
    p.triplet_queries = queries_;
    p.per_tree_leaf_sizes = leaf_sizes_;
    const bool use_set =
        params_.pooling == Pooling::set && params_.aggregation == Aggregation::pooled;
    if (auto* lv = std::get_if<LabelView>(&responses_)) {
      if (use_set) {
        std::vector<double> scores(class_count_, 0.0);
        std::vector<ClassLabel> present;
        for (auto id : unique_items()) {
          const auto c = lv->labels[id];
          if (scores[c]++ == 0.0) present.push_back(c);
        }
        p.label = decide_class(scores, present, class_count_, params_.rule);
      } else {
        p.label = decide_class(scores_, present_, class_count_, params_.rule);
      }
      p.value = p.label;
    } else {
      if (use_set) {
        const auto targets = std::get<std::span<const double>>(responses_);
        const auto ids = unique_items();
        double s = 0.0;
        for (auto id : ids) s += targets[id];
        p.value = s / static_cast<double>(ids.size());
      } else {
        p.value = sum_ / weight_;
      }
    }
    return p;
  }

 private:
  void bump(ClassLabel c, double w) {
    if (scores_[c] == 0.0) present_.push_back(c);
    scores_[c] += w;
  }

  std::vector<ItemId> unique_items() const {
    std::vector<ItemId> ids = items_;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }

  ForestParams params_;
  Responses responses_;
  std::uint32_t class_count_ = 0;
  std::vector<double> scores_;
  std::vector<ClassLabel> present_;
  std::vector<ItemId> items_;
  double sum_ = 0.0;
  double weight_ = 0.0;
  std::uint64_t pooled_size_ = 0;
  std::uint64_t queries_ = 0;
  std::vector<std::uint32_t> leaf_sizes_;
};

/// Trains params.trees comparison trees on `train`. Tree j draws its
/// subsample and pivots from split_seed(params.seed, j), so a forest of M
/// trees is a prefix of any larger forest with the same seed.
template <TripletOracle O>
Forest fit(std::span<const ItemId> train, const O& oracle, const Responses& responses,
           const ForestParams& params, const FitOptions& options = {}) {
  params.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  forest_detail::check_responses(params.task, responses);
  const LabelView* labels = std::get_if<LabelView>(&responses);
  for (auto id : train) {
    if (id >= oracle.size()) throw DataError("training item id outside the oracle's item range");
  }

  Forest forest;
  forest.params = params;
  forest.train.assign(train.begin(), train.end());
  forest.fingerprint = options.fingerprint;
  forest.item_count = oracle.size();
  forest.class_count = labels ? labels->class_count : 0;
  forest.trees.resize(params.trees);
  if (params.ratio < 1.0) forest.subsamples.resize(params.trees);

  const LabelView* build_labels = params.policy == PivotPolicy::supervised ? labels : nullptr;
  parallel_for(params.trees, options.threads, [&](std::size_t j) {
    const std::uint64_t seed = forest_detail::tree_seed(params.seed, j);
    BuildParams bp{params.n0, split_seed(seed, 2), params.policy, params.sampling};
    if (params.ratio < 1.0) {
      forest.subsamples[j] = subsample(train, params.ratio, split_seed(seed, 1));
      forest.trees[j] = build_tree(forest.subsamples[j], oracle, build_labels, bp);
    } else {
      forest.trees[j] = build_tree(train, oracle, build_labels, bp);
    }
  });
  return forest;
}

/// Forest decisions using only the first k trees, for every k in
/// `tree_counts` (ascending, each in [1, M]); one traversal per tree.
template <TripletOracle O>
std::vector<Prediction> predict_prefixes(const Forest& forest, ItemId query, const O& oracle,
                                         const Responses& responses,
                                         std::span<const std::uint32_t> tree_counts) {
  LeafPool pool(forest.params, responses, forest.class_count);
  std::vector<Prediction> out;
  out.reserve(tree_counts.size());
  std::size_t next = 0;
  for (std::size_t j = 0; j < forest.trees.size() && next < tree_counts.size(); ++j) {
    const auto& tree = forest.trees[j];
    const Traversal t = traverse(tree, query, oracle);
    pool.add_leaf(tree.items(t.leaf), t.depth);
    while (next < tree_counts.size() && tree_counts[next] == j + 1) {
      out.push_back(pool.result());
      ++next;
    }
  }
  if (out.size() != tree_counts.size()) {
    throw ConfigError("prefix tree counts must be ascending and at most the forest size");
  }
  return out;
}

template <TripletOracle O>
Prediction predict(const Forest& forest, ItemId query, const O& oracle, const Responses& responses) {
  const std::uint32_t all = static_cast<std::uint32_t>(forest.trees.size());
  return std::move(predict_prefixes(forest, query, oracle, responses, {&all, 1}).front());
}

/// Element-wise predict; output order follows `queries`.
template <TripletOracle O>
std::vector<Prediction> predict_batch(const Forest& forest, std::span<const ItemId> queries,
                                      const O& oracle, const Responses& responses,
                                      unsigned threads = 1) {
  forest_detail::check_responses(forest.params.task, responses);
  std::vector<Prediction> out(queries.size());
  parallel_for(queries.size(), threads,
               [&](std::size_t i) { out[i] = predict(forest, queries[i], oracle, responses); });
  return out;
}

inline std::uint64_t total_queries(std::span<const Prediction> predictions) {
  std::uint64_t total = 0;
  for (const auto& p : predictions) total += p.triplet_queries;
  return total;
}

// ---------------------------------------------------------------------------
// Model file. Little-endian throughout:
//   "CMPRFMDL" | u32 version | params | u64 fingerprint | u64 item_count |
//   u32 class_count | train ids | u8 has_subsamples | per tree: [subsample
//   ids] u64 build_queries, u64 node_count, nodes (6 x u32), member ids |
//   u64 FNV-1a checksum of everything before it.
// Id lists are a u64 length followed by u32 ids.

inline constexpr char kModelMagic[8] = {'C', 'M', 'P', 'R', 'F', 'M', 'D', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace model_detail {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void ids(std::span<const ItemId> v) {
    u64(v.size());
    for (auto id : v) u32(id);
  }
  void raw(std::string_view s) { bytes_.append(s); }
  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<ItemId> ids() {
    const std::uint64_t n = u64();
    if (n > (bytes_.size() - pos_) / 4) throw DataError("model file truncated");
    std::vector<ItemId> v(n);
    for (auto& id : v) id = u32();
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("model file truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::uint64_t checksum(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class E>
E enum_from(std::uint8_t v, std::uint8_t max, const char* what) {
  if (v > max) throw DataError(std::string("model file has invalid ") + what);
  return static_cast<E>(v);
}

}  // namespace model_detail

inline std::string serialize(const Forest& forest) {
  model_detail::Writer w;
  w.raw(std::string_view(kModelMagic, sizeof(kModelMagic)));
  w.u32(kModelFormatVersion);
  const auto& p = forest.params;
  w.u32(p.trees);
  w.u32(p.n0);
  w.f64(p.ratio);
  w.u64(p.seed);
  w.u8(static_cast<std::uint8_t>(p.policy));
  w.u8(static_cast<std::uint8_t>(p.task));
  w.u8(static_cast<std::uint8_t>(p.rule));
  w.u8(static_cast<std::uint8_t>(p.pooling));
  w.u8(static_cast<std::uint8_t>(p.aggregation));
  w.u8(static_cast<std::uint8_t>(p.sampling));
  w.u64(forest.fingerprint);
  w.u64(forest.item_count);
  w.u32(forest.class_count);
  w.ids(forest.train);
  w.u8(forest.subsamples.empty() ? 0 : 1);
  for (std::size_t j = 0; j < forest.trees.size(); ++j) {
    if (!forest.subsamples.empty()) w.ids(forest.subsamples[j]);
    const auto& t = forest.trees[j];
    w.u64(t.build_queries);
    w.u64(t.nodes.size());
    for (const auto& n : t.nodes) {
      w.u32(n.left_pivot);
      w.u32(n.right_pivot);
      w.u32(n.left_child);
      w.u32(n.right_child);
      w.u32(n.begin);
      w.u32(n.count);
    }
    w.ids(t.members);
  }
  w.u64(model_detail::checksum(w.bytes()));
  return std::move(w.bytes());
}

/// Parses a model. When `expected_fingerprint` is given, a model trained on
/// different data is rejected.
inline Forest deserialize(std::string_view bytes,
                          std::optional<std::uint64_t> expected_fingerprint = std::nullopt) {
  using model_detail::enum_from;
  if (bytes.size() < sizeof(kModelMagic) + 12) throw DataError("model file truncated");
  if (bytes.substr(0, sizeof(kModelMagic)) != std::string_view(kModelMagic, sizeof(kModelMagic))) {
    throw DataError("not a comparison forest model file");
  }
  model_detail::Reader r(bytes);
  r.take(sizeof(kModelMagic));
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw DataError("model format version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kModelFormatVersion) + ")");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  {
    model_detail::Reader tail(bytes.substr(bytes.size() - 8));
    if (tail.u64() != model_detail::checksum(body)) {
      throw DataError("model file is corrupt or truncated (checksum mismatch)");
    }
  }
  model_detail::Reader in(body);
  in.take(sizeof(kModelMagic) + 4);
  Forest f;
  auto& p = f.params;
  p.trees = in.u32();
  p.n0 = in.u32();
  p.ratio = in.f64();
  p.seed = in.u64();
  p.policy = enum_from<PivotPolicy>(in.u8(), 1, "pivot policy");
  p.task = enum_from<TaskKind>(in.u8(), 1, "task");
  p.rule = enum_from<MulticlassRule>(in.u8(), 1, "multiclass rule");
  p.pooling = enum_from<Pooling>(in.u8(), 1, "pooling");
  p.aggregation = enum_from<Aggregation>(in.u8(), 1, "aggregation");
  p.sampling = enum_from<SupervisedSampling>(in.u8(), 1, "sampling");
  p.validate();
  f.fingerprint = in.u64();
  f.item_count = in.u64();
  f.class_count = in.u32();
  f.train = in.ids();
  const bool has_subsamples = in.u8() != 0;
  if (has_subsamples) f.subsamples.resize(p.trees);
  f.trees.resize(p.trees);
  for (std::size_t j = 0; j < p.trees; ++j) {
    if (has_subsamples) f.subsamples[j] = in.ids();
    auto& t = f.trees[j];
    t.build_queries = in.u64();
    const std::uint64_t nodes = in.u64();
    if (nodes == 0 || nodes > in.remaining() / 24) throw DataError("model file has a malformed tree");
    t.nodes.resize(nodes);
    for (auto& n : t.nodes) {
      n.left_pivot = in.u32();
      n.right_pivot = in.u32();
      n.left_child = in.u32();
      n.right_child = in.u32();
      n.begin = in.u32();
      n.count = in.u32();
    }
    t.members = in.ids();
    for (const auto& n : t.nodes) {
      const bool bad_child = !n.is_leaf() && (n.left_child >= nodes || n.right_child >= nodes);
      if (bad_child || static_cast<std::uint64_t>(n.begin) + n.count > t.members.size()) {
        throw DataError("model file has a malformed tree");
      }
    }
  }
  if (in.remaining() != 0) throw DataError("model file has trailing data");
  if (expected_fingerprint && *expected_fingerprint != f.fingerprint) {
    throw DataError("model was trained on a different dataset (fingerprint mismatch)");
  }
  return f;
}

/// Writes the model atomically (temporary file, then rename).
inline void save(const Forest& forest, const std::string& path) {
  const std::string bytes = serialize(forest);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline Forest load(const std::string& path,
                   std::optional<std::uint64_t> expected_fingerprint = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path);
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize(bytes, expected_fingerprint);
}

}  // namespace comprf
