#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "optspace/error.hpp"
#include "optspace/observed_matrix.hpp"
#include "optspace/random.hpp"

using namespace optspace;

namespace {

ObservedMatrix random_obs(Index m, Index n, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::set<std::pair<Index, Index>> seen;
  std::vector<Entry> entries;
  while (entries.size() < count) {
    const Index i = static_cast<Index>(rng.below(m));
    const Index j = static_cast<Index>(rng.below(n));
    if (seen.insert({i, j}).second) entries.push_back({i, j, rng.normal()});
  }
  return ObservedMatrix(m, n, std::move(entries));
}

ObservedMatrix full_mask(Index m, Index n) {
  std::vector<Entry> entries;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) entries.push_back({i, j, 1.0});
  return ObservedMatrix(m, n, std::move(entries));
}

}  // namespace

TEST(ObservedMatrix, SortsEntriesByRowThenColumn) {
  ObservedMatrix obs(3, 3, {{2, 0, 1.0}, {0, 2, 2.0}, {0, 1, 3.0}});
  const auto e = obs.entries();
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0], (Entry{0, 1, 3.0}));
  EXPECT_EQ(e[1], (Entry{0, 2, 2.0}));
  EXPECT_EQ(e[2], (Entry{2, 0, 1.0}));
}

TEST(ObservedMatrix, RejectsDuplicates) {
  try {
    ObservedMatrix(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(ObservedMatrix, RejectsOutOfRangeIndices) {
  EXPECT_THROW(ObservedMatrix(2, 2, {{2, 0, 1.0}}), Error);
  EXPECT_THROW(ObservedMatrix(2, 2, {{0, -1, 1.0}}), Error);
}

TEST(ObservedMatrix, DenseAndProducts) {
  const auto obs = random_obs(7, 5, 15, 3);
  const Eigen::MatrixXd dense = obs.to_dense();
  Rng rng(4);
  Eigen::MatrixXd b(5, 3), c(7, 3);
  for (Index k = 0; k < b.size(); ++k) b.data()[k] = rng.normal();
  for (Index k = 0; k < c.size(); ++k) c.data()[k] = rng.normal();
  EXPECT_LT((obs.multiply(b) - dense * b).norm(), 1e-12);
  EXPECT_LT((obs.multiply_transpose(c) - dense.transpose() * c).norm(), 1e-12);
  EXPECT_NEAR(obs.squared_norm(), dense.squaredNorm(), 1e-12);
  EXPECT_EQ(obs.mask().sum(), 15.0);
}

TEST(Project, FullMaskCopiesEverything) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 3);
  const auto obs = project(full_mask(4, 3), a);
  EXPECT_EQ(obs.to_dense(), a);
}

TEST(Project, EmptyMaskGivesNoEntries) {
  const auto obs = project(ObservedMatrix(4, 3, {}), Eigen::MatrixXd::Ones(4, 3));
  EXPECT_TRUE(obs.empty());
}

TEST(Project, SingleEntry) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 1) = 7.0;
  const auto obs = project(ObservedMatrix(2, 2, {{0, 1, 0.0}}), a);
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(obs.entries()[0], (Entry{0, 1, 7.0}));
}

TEST(Project, RestrictionIsBitwiseExact) {
  const auto mask = random_obs(9, 8, 30, 5);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(9, 8);
  const auto projected = project(mask, a);
  for (const Entry& e : projected.entries()) EXPECT_EQ(e.value, a(e.row, e.col));
}

TEST(Project, ShapeMismatchThrows) {
  EXPECT_THROW(project(full_mask(2, 2), Eigen::MatrixXd::Zero(3, 2)), Error);
}

TEST(Degrees, Empty) {
  const auto d = degrees(ObservedMatrix(3, 2, {}));
  EXPECT_EQ(d.row_degrees, (std::vector<Index>{0, 0, 0}));
  EXPECT_EQ(d.col_degrees, (std::vector<Index>{0, 0}));
}

TEST(Degrees, SingleEntry) {
  const auto d = degrees(ObservedMatrix(4, 5, {{2, 3, 1.0}}));
  EXPECT_EQ(d.row_degrees, (std::vector<Index>{0, 0, 1, 0}));
  EXPECT_EQ(d.col_degrees[3], 1);
}

TEST(Degrees, Conservation) {
  const auto d = degrees(random_obs(10, 10, 30, 7));
  Index rows = 0, cols = 0;
  for (Index v : d.row_degrees) rows += v;
  for (Index v : d.col_degrees) cols += v;
  EXPECT_EQ(rows, 30);
  EXPECT_EQ(cols, 30);
}

TEST(Trim, UniformDegreesUnchanged) {
  // 4x4 circulant pattern: every row and column has degree 2.
  std::vector<Entry> entries;
  for (Index i = 0; i < 4; ++i) {
    entries.push_back({i, i, 1.0});
    entries.push_back({i, (i + 1) % 4, 2.0});
  }
  ObservedMatrix obs(4, 4, entries);
  EXPECT_EQ(trim(obs).entries().size(), obs.size());
}

TEST(Trim, HeavyRowRemoved) {
  // Row 0 holds 8 of 20 entries, above 2 * 20 / 10 = 4.
  std::vector<Entry> entries;
  for (Index j = 0; j < 8; ++j) entries.push_back({0, j, 1.0});
  for (Index k = 0; k < 12; ++k) entries.push_back({1 + k % 9, (k * 7 + 3) % 10, 1.0});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::pair(a.row, a.col) < std::pair(b.row, b.col);
  });
  entries.erase(std::unique(entries.begin(), entries.end(),
                            [](const Entry& a, const Entry& b) {
                              return a.row == b.row && a.col == b.col;
                            }),
                entries.end());
  ObservedMatrix obs(10, 10, entries);
  const double row_limit = 2.0 * static_cast<double>(obs.size()) / 10.0;
  const double col_limit = row_limit;
  const auto before = degrees(obs);
  const auto trimmed = trim(obs);
  for (const Entry& e : trimmed.entries()) EXPECT_NE(e.row, 0);
  // Brute-force oracle: keep exactly the entries whose row and column pass.
  std::size_t expected = 0;
  for (const Entry& e : obs.entries()) {
    expected += before.row_degrees[e.row] <= row_limit && before.col_degrees[e.col] <= col_limit;
  }
  EXPECT_EQ(trimmed.size(), expected);
}

TEST(Trim, SingleEntrySmallMatrixUnchanged) {
  // Threshold 2 * 1 / 1 = 2 >= degree 1. (On large matrices 2|E|/m < 1 and the
  // single row would be dropped.)
  EXPECT_EQ(trim(ObservedMatrix(1, 1, {{0, 0, 3.0}})).size(), 1u);
  EXPECT_EQ(trim(ObservedMatrix(2, 2, {{1, 0, 3.0}})).size(), 1u);
}

TEST(Trim, EmptyRejected) {
  EXPECT_THROW(trim(ObservedMatrix(3, 3, {})), Error);
}

TEST(Trim, SurvivingDegreesRespectThresholds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // Skewed pattern: a few dense rows and columns on top of a sparse background.
    Rng rng(seed);
    std::set<std::pair<Index, Index>> seen;
    std::vector<Entry> entries;
    for (int k = 0; k < 200; ++k) {
      Index i = static_cast<Index>(rng.below(30));
      Index j = static_cast<Index>(rng.below(25));
      if (rng.uniform() < 0.3) i = 0;
      if (rng.uniform() < 0.2) j = 1;
      if (seen.insert({i, j}).second) entries.push_back({i, j, 1.0});
    }
    ObservedMatrix obs(30, 25, entries);
    const double row_limit = 2.0 * double(obs.size()) / 30.0;
    const double col_limit = 2.0 * double(obs.size()) / 25.0;
    const auto d = degrees(trim(obs));
    for (Index v : d.row_degrees) EXPECT_LE(double(v), row_limit);
    for (Index v : d.col_degrees) EXPECT_LE(double(v), col_limit);
  }
}

TEST(SplitHoldout, ZeroFraction) {
  const auto obs = random_obs(8, 8, 20, 1);
  const auto split = split_holdout(obs, 0.0, 9);
  EXPECT_TRUE(split.validation.empty());
  EXPECT_TRUE(std::equal(split.train.entries().begin(), split.train.entries().end(),
                         obs.entries().begin(), obs.entries().end()));
}

TEST(SplitHoldout, ConservationAndDisjointness) {
  const auto obs = random_obs(20, 15, 120, 2);
  for (double f : {0.1, 0.25, 0.5, 0.9}) {
    const auto split = split_holdout(obs, f, 11);
    EXPECT_EQ(split.train.size() + split.validation.size(), obs.size());
    EXPECT_EQ(split.validation.size(), static_cast<std::size_t>(std::llround(f * 120)));
    std::set<std::pair<Index, Index>> train;
    for (const Entry& e : split.train.entries()) train.insert({e.row, e.col});
    for (const Entry& e : split.validation.entries()) {
      EXPECT_EQ(train.count({e.row, e.col}), 0u);
    }
  }
}

TEST(SplitHoldout, DeterministicGivenSeed) {
  const auto obs = random_obs(20, 15, 120, 2);
  const auto a = split_holdout(obs, 0.3, 5);
  const auto b = split_holdout(obs, 0.3, 5);
  const auto c = split_holdout(obs, 0.3, 6);
  EXPECT_TRUE(std::equal(a.validation.entries().begin(), a.validation.entries().end(),
                         b.validation.entries().begin(), b.validation.entries().end()));
  EXPECT_FALSE(std::equal(a.validation.entries().begin(), a.validation.entries().end(),
                          c.validation.entries().begin(), c.validation.entries().end()));
}

TEST(SplitHoldout, RejectsBadFraction) {
  const auto obs = random_obs(5, 5, 10, 2);
  EXPECT_THROW(split_holdout(obs, 1.0, 1), Error);
  EXPECT_THROW(split_holdout(obs, -0.1, 1), Error);
}
