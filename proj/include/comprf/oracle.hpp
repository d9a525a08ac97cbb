#pragma once

// Triplet-comparison oracles. Every distance access in the library goes
// through one of these types. An oracle answers "is `anchor` at least as
// close to `left` as to `right`?"; exact ties answer true.

#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "comprf/error.hpp"
#include "comprf/matrix.hpp"
#include "comprf/rng.hpp"

namespace comprf {

using ItemId = std::uint32_t;

/// Reserved id of the out-of-dataset query item bound with `with_query`.
inline constexpr ItemId kQueryItem = std::numeric_limits<ItemId>::max();

struct TripletQuery {
  ItemId anchor = 0;
  ItemId left = 0;
  ItemId right = 0;

  friend bool operator==(const TripletQuery&, const TripletQuery&) = default;
};

struct OracleStats {
  std::uint64_t query_count = 0;
  std::uint64_t cache_hits = 0;
};

template <class O>
concept TripletOracle = requires(const O& o, ItemId id) {
  { o.closer_to_left(id, id, id) } -> std::convertible_to<bool>;
  { o.size() } -> std::convertible_to<std::size_t>;
};

/// An oracle that can also report raw distances (needed by the KNN baseline,
/// never by the forest).
template <class O>
concept DistanceOracle = TripletOracle<O> && requires(const O& o, ItemId id) {
  { o.distance(id, id) } -> std::convertible_to<double>;
};

template <TripletOracle O>
bool ask(const O& oracle, const TripletQuery& q) {
  return oracle.closer_to_left(q.anchor, q.left, q.right);
}

namespace detail {

inline constexpr double kMatrixTolerance = 1e-9;

[[noreturn]] inline void missing_query(const char* backend) {
  throw DataError(std::string(backend) +
                  " oracle has no query item bound; cannot place an out-of-dataset item");
}

}  // namespace detail

/// Euclidean metric on explicit feature vectors. Compares squared distances.
class EuclideanOracle {
 public:
  explicit EuclideanOracle(std::shared_ptr<const Matrix> points) : points_(std::move(points)) {
    if (!points_) throw DataError("euclidean oracle requires a feature matrix");
  }
  explicit EuclideanOracle(Matrix points)
      : EuclideanOracle(std::make_shared<const Matrix>(std::move(points))) {}
  /// Throws DataError when the rows do not share one dimension.
  explicit EuclideanOracle(const std::vector<std::vector<double>>& rows)
      : EuclideanOracle(Matrix::from_rows(rows)) {}

  std::size_t size() const noexcept { return points_->rows(); }
  std::size_t dimension() const noexcept { return points_->cols(); }
  bool has_query() const noexcept { return query_ != nullptr; }

  bool closer_to_left(ItemId anchor, ItemId left, ItemId right) const {
    const auto a = point(anchor);
    return squared_distance(a, point(left)) <= squared_distance(a, point(right));
  }

  double squared(ItemId a, ItemId b) const { return squared_distance(point(a), point(b)); }
  double distance(ItemId a, ItemId b) const { return std::sqrt(squared(a, b)); }

  /// Returns a copy of this oracle in which `kQueryItem` denotes `query`.
  EuclideanOracle with_query(std::span<const double> query) const {
    if (query.size() != dimension()) {
      throw DataError("query has dimension " + std::to_string(query.size()) + ", expected " +
                      std::to_string(dimension()));
    }
    EuclideanOracle copy = *this;
    copy.query_ = std::make_shared<const std::vector<double>>(query.begin(), query.end());
    return copy;
  }

  const Matrix& points() const noexcept { return *points_; }

 private:
  std::span<const double> point(ItemId id) const {
    if (id == kQueryItem) {
      if (!query_) detail::missing_query("euclidean");
      return *query_;
    }
    return points_->row(id);
  }

  std::shared_ptr<const Matrix> points_;
  std::shared_ptr<const std::vector<double>> query_;
};

/// Direct lookup in a precomputed dissimilarity matrix.
class DistanceMatrixOracle {
 public:
  explicit DistanceMatrixOracle(std::shared_ptr<const Matrix> distances)
      : dist_(std::move(distances)) {
    if (!dist_) throw DataError("distance-matrix oracle requires a matrix");
    validate(*dist_);
  }
  explicit DistanceMatrixOracle(Matrix distances)
      : DistanceMatrixOracle(std::make_shared<const Matrix>(std::move(distances))) {}

  /// Checks shape, symmetry, zero diagonal and non-negativity.
  static void validate(const Matrix& d) {
    using detail::kMatrixTolerance;
    if (d.rows() != d.cols()) {
      throw DataError("distance matrix is " + std::to_string(d.rows()) + "x" +
                      std::to_string(d.cols()) + ", expected square");
    }
    for (std::size_t i = 0; i < d.rows(); ++i) {
      if (std::abs(d(i, i)) > kMatrixTolerance) {
        throw DataError("distance matrix has nonzero diagonal at " + std::to_string(i));
      }
      for (std::size_t j = i + 1; j < d.cols(); ++j) {
        if (std::abs(d(i, j) - d(j, i)) > kMatrixTolerance) {
          throw DataError("distance matrix is not symmetric at (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
        }
        if (d(i, j) < -kMatrixTolerance) {
          throw DataError("distance matrix has a negative entry at (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
        }
      }
    }
  }

  std::size_t size() const noexcept { return dist_->rows(); }
  bool has_query() const noexcept { return query_ != nullptr; }

  bool closer_to_left(ItemId anchor, ItemId left, ItemId right) const {
    return lookup(anchor, left) <= lookup(anchor, right);
  }

  double distance(ItemId a, ItemId b) const { return lookup(a, b); }

  /// Binds a query item given its distances to every dataset item.
  DistanceMatrixOracle with_query(std::span<const double> row) const {
    if (row.size() != size()) {
      throw DataError("query distance row has " + std::to_string(row.size()) +
                      " entries, expected " + std::to_string(size()));
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] < -detail::kMatrixTolerance) {
        throw DataError("query distance row has a negative entry at " + std::to_string(i));
      }
    }
    DistanceMatrixOracle copy = *this;
    copy.query_ = std::make_shared<const std::vector<double>>(row.begin(), row.end());
    return copy;
  }

  const Matrix& distances() const noexcept { return *dist_; }

 private:
  double lookup(ItemId a, ItemId b) const {
    if (a == kQueryItem || b == kQueryItem) {
      if (!query_) detail::missing_query("distance-matrix");
      if (a == b) return 0.0;
      return (*query_)[a == kQueryItem ? b : a];
    }
    return (*dist_)(a, b);
  }

  std::shared_ptr<const Matrix> dist_;
  std::shared_ptr<const std::vector<double>> query_;
};

/// Kernel (Gram) matrix backend. Kernel values are converted to squared
/// distances d2(i,j) = K(i,i) + K(j,j) - 2 K(i,j); comparisons use d2.
class GramOracle {
 public:
  explicit GramOracle(const Matrix& gram) : sq_(std::make_shared<const Matrix>(induce(gram))) {
    std::vector<double> diag(gram.rows());
    for (std::size_t i = 0; i < gram.rows(); ++i) diag[i] = gram(i, i);
    diag_ = std::make_shared<const std::vector<double>>(std::move(diag));
  }

  /// Squared distances induced by a kernel matrix; throws DataError naming
  /// the first pair whose squared distance is negative beyond tolerance.
  static Matrix induce(const Matrix& k) {
    using detail::kMatrixTolerance;
    if (k.rows() != k.cols()) throw DataError("gram matrix must be square");
    const std::size_t n = k.rows();
    Matrix sq(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (std::abs(k(i, j) - k(j, i)) > kMatrixTolerance) {
          throw DataError("gram matrix is not symmetric at (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
        }
        const double d2 = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if (d2 < -kMatrixTolerance) {
          throw DataError("gram matrix induces negative squared distance " + std::to_string(d2) +
                          " for pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
        }
        sq(i, j) = sq(j, i) = d2 < 0.0 ? 0.0 : d2;
      }
    }
    return sq;
  }

  std::size_t size() const noexcept { return sq_->rows(); }
  bool has_query() const noexcept { return query_ != nullptr; }

  bool closer_to_left(ItemId anchor, ItemId left, ItemId right) const {
    return lookup(anchor, left) <= lookup(anchor, right);
  }

  double squared(ItemId a, ItemId b) const { return lookup(a, b); }
  double distance(ItemId a, ItemId b) const { return std::sqrt(lookup(a, b)); }

  /// Binds a query item from its kernel values against every dataset item
  /// plus its self-kernel value.
  GramOracle with_query(std::span<const double> kernel_row, double self_kernel) const {
    if (kernel_row.size() != size()) {
      throw DataError("query kernel row has " + std::to_string(kernel_row.size()) +
                      " entries, expected " + std::to_string(size()));
    }
    std::vector<double> row(size());
    for (std::size_t i = 0; i < size(); ++i) {
      const double d2 = self_kernel + (*diag_)[i] - 2.0 * kernel_row[i];
      if (d2 < -detail::kMatrixTolerance) {
        throw DataError("query kernel row induces negative squared distance for pair (query," +
                        std::to_string(i) + ")");
      }
      row[i] = d2 < 0.0 ? 0.0 : d2;
    }
    GramOracle copy = *this;
    copy.query_ = std::make_shared<const std::vector<double>>(std::move(row));
    return copy;
  }

  const Matrix& squared_distances() const noexcept { return *sq_; }

 private:
  double lookup(ItemId a, ItemId b) const {
    if (a == kQueryItem || b == kQueryItem) {
      if (!query_) detail::missing_query("gram");
      if (a == b) return 0.0;
      return (*query_)[a == kQueryItem ? b : a];
    }
    return (*sq_)(a, b);
  }

  std::shared_ptr<const Matrix> sq_;
  std::shared_ptr<const std::vector<double>> diag_;
  std::shared_ptr<const std::vector<double>> query_;
};

/// Counts every triplet query forwarded to the wrapped oracle. Copies (and
/// `with_query` rebinds) share one atomic counter.
template <TripletOracle Inner>
class CountingOracle {
 public:
  explicit CountingOracle(Inner inner)
      : inner_(std::move(inner)), count_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}
  CountingOracle(Inner inner, std::shared_ptr<std::atomic<std::uint64_t>> counter)
      : inner_(std::move(inner)), count_(std::move(counter)) {}

  std::size_t size() const { return inner_.size(); }

  bool closer_to_left(ItemId anchor, ItemId left, ItemId right) const {
    count_->fetch_add(1, std::memory_order_relaxed);
    return inner_.closer_to_left(anchor, left, right);
  }

  /// Raw distances are not triplet queries and are not counted.
  double distance(ItemId a, ItemId b) const
    requires DistanceOracle<Inner>
  {
    return inner_.distance(a, b);
  }

  template <class... Args>
  auto with_query(Args&&... args) const {
    using Bound = decltype(inner_.with_query(std::forward<Args>(args)...));
    return CountingOracle<Bound>(inner_.with_query(std::forward<Args>(args)...), count_);
  }

  OracleStats stats() const { return {count_->load(std::memory_order_relaxed), 0}; }
  void reset() { count_->store(0, std::memory_order_relaxed); }
  const Inner& inner() const noexcept { return inner_; }

 private:
  Inner inner_;
  std::shared_ptr<std::atomic<std::uint64_t>> count_;
};

/// Memoizes answers keyed on the ordered triple. Both orientations of a
/// triple are stored independently: under the tie rule query(a,l,r) and
/// query(a,r,l) can both be true, so no negation shortcut is applied.
/// Queries involving the bound query item bypass the cache. Thread-safe.
template <TripletOracle Inner>
class CachingOracle {
 public:
  explicit CachingOracle(Inner inner)
      : inner_(std::move(inner)), shared_(std::make_shared<Shared>()) {}

  std::size_t size() const { return inner_.size(); }

  bool closer_to_left(ItemId anchor, ItemId left, ItemId right) const {
    shared_->queries.fetch_add(1, std::memory_order_relaxed);
    if (anchor == kQueryItem || left == kQueryItem || right == kQueryItem) {
      return inner_.closer_to_left(anchor, left, right);
    }
    const TripletQuery key{anchor, left, right};
    {
      std::lock_guard lock(shared_->mutex);
      if (auto it = shared_->answers.find(key); it != shared_->answers.end()) {
        shared_->hits.fetch_add(1, std::memory_order_relaxed);
        return it->second;
      }
    }
    const bool answer = inner_.closer_to_left(anchor, left, right);
    std::lock_guard lock(shared_->mutex);
    shared_->answers.emplace(key, answer);
    return answer;
  }

  double distance(ItemId a, ItemId b) const
    requires DistanceOracle<Inner>
  {
    return inner_.distance(a, b);
  }

  OracleStats stats() const {
    return {shared_->queries.load(std::memory_order_relaxed),
            shared_->hits.load(std::memory_order_relaxed)};
  }

  std::size_t cached_entries() const {
    std::lock_guard lock(shared_->mutex);
    return shared_->answers.size();
  }

  const Inner& inner() const noexcept { return inner_; }

 private:
  struct KeyHash {
    std::size_t operator()(const TripletQuery& q) const noexcept {
      const std::uint64_t packed = (static_cast<std::uint64_t>(q.anchor) << 32) ^ q.left;
      return static_cast<std::size_t>(mix64(packed) ^ mix64(q.right));
    }
  };
  struct Shared {
    mutable std::mutex mutex;
    std::unordered_map<TripletQuery, bool, KeyHash> answers;
    std::atomic<std::uint64_t> queries{0};
    std::atomic<std::uint64_t> hits{0};
  };

  Inner inner_;
  std::shared_ptr<Shared> shared_;
};

/// Runtime choice of backend.
using Backend = std::variant<EuclideanOracle, DistanceMatrixOracle, GramOracle>;

}  // namespace comprf
