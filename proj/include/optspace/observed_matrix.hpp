#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace optspace {

using Index = Eigen::Index;

/// One revealed entry of the observation matrix.
struct Entry {
  Index row = 0;
  Index col = 0;
  double value = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// The revealed entries of an m x n matrix, i.e. the index set E together with
/// the values of P_E(N). Unobserved positions are implicitly zero.
///
/// Entries are kept in triplet form sorted by (row, col); iteration order and
/// therefore every accumulation below is deterministic. Instances are
/// immutable once constructed.
class ObservedMatrix {
 public:
  ObservedMatrix() = default;

  /// Validates indices, sorts, and rejects duplicate (row, col) pairs.
  ObservedMatrix(Index rows, Index cols, std::vector<Entry> entries);

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const Entry> entries() const noexcept { return entries_; }

  /// Same index set with new values (one per entry, in entry order).
  ObservedMatrix with_values(std::span<const double> values) const;

  /// P_E(N) as a dense matrix.
  Eigen::MatrixXd to_dense() const;

  /// Dense mask with ones on observed positions.
  Eigen::MatrixXd mask() const;

  double squared_norm() const;

  /// P_E(N) * B for B with cols() rows.
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& rhs) const;

  /// P_E(N)^T * B for B with rows() rows.
  Eigen::MatrixXd multiply_transpose(const Eigen::MatrixXd& rhs) const;

 private:
  struct Unchecked {};
  ObservedMatrix(Unchecked, Index rows, Index cols, std::vector<Entry> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {}

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Entry> entries_;
};

struct DegreeProfile {
  std::vector<Index> row_degrees;
  std::vector<Index> col_degrees;
};

/// Copies `dense` onto the index set of `mask`.
ObservedMatrix project(const ObservedMatrix& mask, const Eigen::MatrixXd& dense);

DegreeProfile degrees(const ObservedMatrix& obs);

/// Default over-representation factor for trimming (multiple of the average
/// degree above which a row or column is dropped).
inline constexpr double kDefaultTrimFactor = 2.0;

/// Drops every row whose degree exceeds factor * |E| / m and every column whose
/// degree exceeds factor * |E| / n. Both thresholds and degrees refer to the
/// input, so the output is a subset of E whose surviving degrees respect them.
ObservedMatrix trim(const ObservedMatrix& obs,
                    double factor = kDefaultTrimFactor);

struct HoldoutSplit {
  ObservedMatrix train;
  ObservedMatrix validation;
};

/// Random disjoint partition of the entries; the validation part has
/// round(fraction * |E|) entries. Deterministic given `seed`.
HoldoutSplit split_holdout(const ObservedMatrix& obs, double fraction,
                           std::uint64_t seed);

}  // namespace optspace
