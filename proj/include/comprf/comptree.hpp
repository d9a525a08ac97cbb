#pragma once

// Comparison trees. A node holds two pivot items; every other item of the
// node goes to the left child when it is at least as close to the left pivot
// as to the right one. Construction only ever asks the oracle triplet
// questions.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "comprf/dataset.hpp"
#include "comprf/error.hpp"
#include "comprf/oracle.hpp"
#include "comprf/rng.hpp"

namespace comprf {

enum class PivotPolicy : std::uint8_t { supervised = 0, unsupervised = 1 };

/// How a supervised pivot pair is drawn.
enum class SupervisedSampling : std::uint8_t {
  /// Uniform over unordered pairs with differing labels.
  uniform_pair = 0,
  /// First pivot uniform over items that have an opposite-label partner,
  /// second pivot uniform over the items labelled differently from it.
  uniform_first = 1,
};

struct BuildParams {
  std::uint32_t n0 = 1;
  std::uint64_t seed = 0;
  PivotPolicy policy = PivotPolicy::supervised;
  SupervisedSampling sampling = SupervisedSampling::uniform_pair;
};

inline constexpr std::uint32_t kNoChild = std::numeric_limits<std::uint32_t>::max();

/// Flat tree node. The items below a node occupy members[begin, begin+count)
/// of the owning tree, for internal nodes and leaves alike.
struct TreeNode {
  ItemId left_pivot = 0;
  ItemId right_pivot = 0;
  std::uint32_t left_child = kNoChild;
  std::uint32_t right_child = kNoChild;
  std::uint32_t begin = 0;
  std::uint32_t count = 0;

  bool is_leaf() const noexcept { return left_child == kNoChild; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Immutable comparison tree. nodes[0] is the root; the two children of a
/// node are stored next to each other.
struct CompTree {
  std::vector<TreeNode> nodes;
  std::vector<ItemId> members;
  /// Oracle queries spent on construction.
  std::uint64_t build_queries = 0;

  const TreeNode& root() const { return nodes.front(); }

  std::span<const ItemId> items(const TreeNode& node) const {
    return std::span<const ItemId>(members).subspan(node.begin, node.count);
  }
  std::span<const ItemId> items(std::uint32_t node) const { return items(nodes[node]); }

  std::size_t leaf_count() const {
    std::size_t leaves = 0;
    for (const auto& n : nodes) leaves += n.is_leaf() ? 1 : 0;
    return leaves;
  }

  /// Depth of the deepest leaf (root alone has depth 0).
  std::uint32_t max_depth() const {
    std::uint32_t best = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [id, depth] = stack.back();
      stack.pop_back();
      const auto& n = nodes[id];
      if (n.is_leaf()) {
        best = std::max(best, depth);
      } else {
        stack.emplace_back(n.left_child, depth + 1);
        stack.emplace_back(n.right_child, depth + 1);
      }
    }
    return best;
  }

  friend bool operator==(const CompTree&, const CompTree&) = default;
};

/// Positions (within the candidate span) of the chosen pivots.
struct PivotChoice {
  std::size_t left = 0;
  std::size_t right = 0;
};

namespace tree_detail {

inline PivotChoice uniform_distinct_pair(std::size_t n, Rng& rng) {
  const auto a = static_cast<std::size_t>(rng.uniform_index(n));
  auto b = static_cast<std::size_t>(rng.uniform_index(n - 1));
  if (b >= a) ++b;
  return {a, b};
}

/// Per-node class histogram over a span of items. Reuses its buffers across
/// nodes; only touched entries are reset.
class ClassCounter {
 public:
  void reset(std::uint32_t class_count) {
    for (auto c : touched_) counts_[c] = 0;
    touched_.clear();
    if (counts_.size() < class_count) counts_.resize(class_count, 0);
  }

  void add(ClassLabel c) {
    if (counts_[c]++ == 0) touched_.push_back(c);
  }

  std::size_t count(ClassLabel c) const { return counts_[c]; }
  const std::vector<ClassLabel>& present() const { return touched_; }

 private:
  std::vector<std::size_t> counts_;
  std::vector<ClassLabel> touched_;
};

/// Index (within S) of the `rank`-th item whose label satisfies `pred`.
template <class Pred>
std::size_t nth_matching(std::span<const ItemId> s, std::span<const ClassLabel> labels,
                         std::size_t rank, Pred pred) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (pred(labels[s[i]])) {
      if (rank == 0) return i;
      --rank;
    }
  }
  throw std::logic_error("pivot rank out of range");
}

}  // namespace tree_detail

/// Chooses the two pivots of a node.
///
/// Supervised: a pair with differing labels. Under `uniform_pair` the first
/// pivot's class k is drawn with probability proportional to
/// c_k * (|S| - c_k), the pivot itself uniformly within the class, and the
/// second pivot uniformly among items of other classes; every differing-label
/// pair is then equally likely. When all labels agree the pair is a uniform
/// distinct pair. Unsupervised: a uniform distinct pair. In all cases a fair
/// coin decides which pivot is the left one.
inline PivotChoice select_pivots(std::span<const ItemId> s, const LabelView* labels,
                                 PivotPolicy policy, SupervisedSampling sampling, Rng& rng,
                                 tree_detail::ClassCounter* scratch = nullptr) {
  if (s.size() < 2) throw ConfigError("pivot selection needs at least two items");
  PivotChoice choice;
  bool chosen = false;
  if (policy == PivotPolicy::supervised) {
    if (!labels) throw ConfigError("supervised pivot selection requires class labels");
    tree_detail::ClassCounter local;
    auto& counter = scratch ? *scratch : local;
    counter.reset(labels->class_count);
    for (auto id : s) counter.add(labels->labels[id]);
    if (counter.present().size() > 1) {
      const auto n = static_cast<std::uint64_t>(s.size());
      ClassLabel first_class = 0;
      if (sampling == SupervisedSampling::uniform_pair) {
        std::uint64_t total = 0;
        for (auto c : counter.present()) total += counter.count(c) * (n - counter.count(c));
        std::uint64_t r = rng.uniform_index(total);
        for (auto c : counter.present()) {
          const std::uint64_t w = counter.count(c) * (n - counter.count(c));
          if (r < w) {
            first_class = c;
            break;
          }
          r -= w;
        }
        const auto rank = rng.uniform_index(counter.count(first_class));
        choice.left = tree_detail::nth_matching(s, labels->labels, rank,
                                                [&](ClassLabel l) { return l == first_class; });
      } else {
        // Every item has a partner once two classes are present.
        choice.left = static_cast<std::size_t>(rng.uniform_index(n));
        first_class = labels->labels[s[choice.left]];
      }
      const auto others = n - counter.count(first_class);
      const auto rank = rng.uniform_index(others);
      choice.right = tree_detail::nth_matching(s, labels->labels, rank,
                                               [&](ClassLabel l) { return l != first_class; });
      chosen = true;
    }
  }
  if (!chosen) choice = tree_detail::uniform_distinct_pair(s.size(), rng);
  if (rng.coin()) std::swap(choice.left, choice.right);
  return choice;
}

/// Builds a comparison tree on `build_set`.
///
/// A node with more than n0 items is split: the pivots are moved to the two
/// ends of the node's range and every other item is routed by exactly one
/// query (anchor = item, left = left pivot, right = right pivot). The left
/// pivot always stays left and the right pivot always goes right, so both
/// children are non-empty and strictly smaller than the parent even with
/// duplicate points. A split costs |S| - 2 queries.
template <TripletOracle O>
CompTree build_tree(std::span<const ItemId> build_set, const O& oracle,
                    const LabelView* labels, const BuildParams& params) {
  if (build_set.empty()) throw ConfigError("cannot build a tree on an empty set");
  if (params.n0 < 1) throw ConfigError("leaf size n0 must be at least 1");
  if (params.policy == PivotPolicy::supervised && !labels) {
    throw ConfigError("supervised pivot selection requires class labels");
  }
  if (build_set.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("build set too large");
  }

  CompTree tree;
  tree.members.assign(build_set.begin(), build_set.end());
  tree.nodes.push_back(TreeNode{0, 0, kNoChild, kNoChild, 0, static_cast<std::uint32_t>(build_set.size())});
  Rng rng(params.seed);
  tree_detail::ClassCounter scratch;
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const std::uint32_t id = stack.back();
    stack.pop_back();
    const std::uint32_t begin = tree.nodes[id].begin;
    const std::uint32_t count = tree.nodes[id].count;
    if (count <= params.n0) continue;

    std::span<ItemId> s(tree.members.data() + begin, count);
    PivotChoice p = select_pivots(s, labels, params.policy, params.sampling, rng, &scratch);
    // Left pivot to the front, right pivot to the back.
    std::swap(s[0], s[p.left]);
    if (p.right == 0) p.right = p.left;
    std::swap(s[count - 1], s[p.right]);
    const ItemId left_pivot = s[0];
    const ItemId right_pivot = s[count - 1];

    std::size_t lo = 1;
    std::size_t hi = count - 1;
    while (lo < hi) {
      if (oracle.closer_to_left(s[lo], left_pivot, right_pivot)) {
        ++lo;
      } else {
        --hi;
        std::swap(s[lo], s[hi]);
      }
    }
    tree.build_queries += count - 2;

    const auto left_count = static_cast<std::uint32_t>(lo);
    const auto left_id = static_cast<std::uint32_t>(tree.nodes.size());
    const auto right_id = left_id + 1;
    tree.nodes.push_back(TreeNode{0, 0, kNoChild, kNoChild, begin, left_count});
    tree.nodes.push_back(TreeNode{0, 0, kNoChild, kNoChild, begin + left_count, count - left_count});
    auto& node = tree.nodes[id];
    node.left_pivot = left_pivot;
    node.right_pivot = right_pivot;
    node.left_child = left_id;
    node.right_child = right_id;
    stack.push_back(right_id);
    stack.push_back(left_id);
  }
  return tree;
}

struct Traversal {
  std::uint32_t leaf = 0;
  /// Number of internal nodes passed, which equals the queries issued.
  std::uint32_t depth = 0;
};

/// Routes `query` from the root to a leaf with one oracle query per level.
template <TripletOracle O>
Traversal traverse(const CompTree& tree, ItemId query, const O& oracle) {
  Traversal t;
  while (!tree.nodes[t.leaf].is_leaf()) {
    const auto& node = tree.nodes[t.leaf];
    t.leaf = oracle.closer_to_left(query, node.left_pivot, node.right_pivot) ? node.left_child
                                                                              : node.right_child;
    ++t.depth;
  }
  return t;
}

}  // namespace comprf
