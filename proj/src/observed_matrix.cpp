#include "optspace/observed_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "optspace/error.hpp"
#include "optspace/random.hpp"

namespace optspace {

namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string position(const Entry& e) {
  return "(" + std::to_string(e.row) + ", " + std::to_string(e.col) + ")";
}

}  // namespace

ObservedMatrix::ObservedMatrix(Index rows, Index cols,
                               std::vector<Entry> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows < 0 || cols < 0) {
    throw Error(ErrorKind::InvalidArgument, "negative matrix dimension");
  }
  for (const Entry& e : entries_) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
      throw Error(ErrorKind::InvalidArgument,
                  "entry " + position(e) + " outside " + std::to_string(rows) +
                      " x " + std::to_string(cols) + " matrix");
    }
  }
  auto by_position = [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  };
  if (!std::is_sorted(entries_.begin(), entries_.end(), by_position)) {
    std::stable_sort(entries_.begin(), entries_.end(), by_position);
  }
  auto dup = std::adjacent_find(
      entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.row == b.row && a.col == b.col;
      });
  if (dup != entries_.end()) {
    throw Error(ErrorKind::InvalidArgument,
                "duplicate observation at " + position(*dup));
  }
}

ObservedMatrix ObservedMatrix::with_values(
    std::span<const double> values) const {
  if (values.size() != entries_.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "with_values: expected " + std::to_string(entries_.size()) +
                    " values, got " + std::to_string(values.size()));
  }
  std::vector<Entry> out(entries_);
  for (std::size_t k = 0; k < out.size(); ++k) out[k].value = values[k];
  return ObservedMatrix(Unchecked{}, rows_, cols_, std::move(out));
}

Eigen::MatrixXd ObservedMatrix::to_dense() const {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(rows_, cols_);
  for (const Entry& e : entries_) dense(e.row, e.col) = e.value;
  return dense;
}

Eigen::MatrixXd ObservedMatrix::mask() const {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(rows_, cols_);
  for (const Entry& e : entries_) dense(e.row, e.col) = 1.0;
  return dense;
}

double ObservedMatrix::squared_norm() const {
  double sum = 0.0;
  for (const Entry& e : entries_) sum += e.value * e.value;
  return sum;
}

Eigen::MatrixXd ObservedMatrix::multiply(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != cols_) {
    throw Error(ErrorKind::DimensionMismatch, "multiply: inner dimensions");
  }
  const RowMajor b = rhs;
  RowMajor out = RowMajor::Zero(rows_, rhs.cols());
  for (const Entry& e : entries_) out.row(e.row) += e.value * b.row(e.col);
  return out;
}

Eigen::MatrixXd ObservedMatrix::multiply_transpose(
    const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != rows_) {
    throw Error(ErrorKind::DimensionMismatch,
                "multiply_transpose: inner dimensions");
  }
  const RowMajor b = rhs;
  RowMajor out = RowMajor::Zero(cols_, rhs.cols());
  for (const Entry& e : entries_) out.row(e.col) += e.value * b.row(e.row);
  return out;
}

ObservedMatrix project(const ObservedMatrix& mask,
                       const Eigen::MatrixXd& dense) {
  if (dense.rows() != mask.rows() || dense.cols() != mask.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "project: dense matrix is " + std::to_string(dense.rows()) +
                    " x " + std::to_string(dense.cols()) + ", mask is " +
                    std::to_string(mask.rows()) + " x " +
                    std::to_string(mask.cols()));
  }
  std::vector<double> values;
  values.reserve(mask.size());
  for (const Entry& e : mask.entries()) values.push_back(dense(e.row, e.col));
  return mask.with_values(values);
}

DegreeProfile degrees(const ObservedMatrix& obs) {
  DegreeProfile profile{std::vector<Index>(obs.rows(), 0),
                        std::vector<Index>(obs.cols(), 0)};
  for (const Entry& e : obs.entries()) {
    ++profile.row_degrees[e.row];
    ++profile.col_degrees[e.col];
  }
  return profile;
}

ObservedMatrix trim(const ObservedMatrix& obs, double factor) {
  if (obs.empty()) {
    throw Error(ErrorKind::InvalidArgument, "trim: empty observation set");
  }
  if (!(factor > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "trim: factor must be positive");
  }
  const DegreeProfile deg = degrees(obs);
  const double count = static_cast<double>(obs.size());
  const double row_limit = factor * count / static_cast<double>(obs.rows());
  const double col_limit = factor * count / static_cast<double>(obs.cols());

  std::vector<Entry> kept;
  kept.reserve(obs.size());
  for (const Entry& e : obs.entries()) {
    if (static_cast<double>(deg.row_degrees[e.row]) > row_limit) continue;
    if (static_cast<double>(deg.col_degrees[e.col]) > col_limit) continue;
    kept.push_back(e);
  }
  return ObservedMatrix(obs.rows(), obs.cols(), std::move(kept));
}

HoldoutSplit split_holdout(const ObservedMatrix& obs, double fraction,
                           std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "split_holdout: fraction must lie in [0, 1)");
  }
  const std::size_t total = obs.size();
  const auto held = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(total)));

  // Partial Fisher-Yates: the first `held` slots become the validation set.
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, Stream::Holdout));
  for (std::size_t k = 0; k < held; ++k) {
    const std::size_t pick = k + rng.below(total - k);
    std::swap(order[k], order[pick]);
  }
  std::vector<bool> in_validation(total, false);
  for (std::size_t k = 0; k < held; ++k) in_validation[order[k]] = true;

  std::vector<Entry> train, validation;
  train.reserve(total - held);
  validation.reserve(held);
  const auto entries = obs.entries();
  for (std::size_t k = 0; k < total; ++k) {
    (in_validation[k] ? validation : train).push_back(entries[k]);
  }
  return {ObservedMatrix(obs.rows(), obs.cols(), std::move(train)),
          ObservedMatrix(obs.rows(), obs.cols(), std::move(validation))};
}

}  // namespace optspace
