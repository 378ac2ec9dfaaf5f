#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "optspace/error.hpp"
#include "optspace/matrix_market.hpp"

using namespace optspace;

TEST(MatrixMarket, CoordinateRoundTripIsExact) {
  ObservedMatrix obs(3, 4, {{0, 1, 0.1}, {2, 3, -1.0 / 3.0}, {1, 0, 6.02214076e23}});
  std::stringstream buf;
  io::write_coordinate(buf, obs);
  const auto back = io::read_coordinate(buf);
  EXPECT_EQ(back.rows(), 3);
  EXPECT_EQ(back.cols(), 4);
  ASSERT_EQ(back.size(), obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k) EXPECT_EQ(back.entries()[k], obs.entries()[k]);
}

TEST(MatrixMarket, ArrayRoundTripIsExact) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(5, 3) * 1e-7;
  std::stringstream buf;
  io::write_array(buf, a);
  EXPECT_EQ(io::read_array(buf), a);
}

TEST(MatrixMarket, ReadsCommentsAndOneBasedIndices) {
  std::istringstream in(
      "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 5\n2 1 -1.5\n");
  const auto obs = io::read_coordinate(in);
  EXPECT_EQ(obs.entries()[0], (Entry{0, 0, 5.0}));
  EXPECT_EQ(obs.entries()[1], (Entry{1, 0, -1.5}));
}

TEST(MatrixMarket, DuplicateEntryIsAnError) {
  std::istringstream in(
      "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 5\n1 1 6\n");
  EXPECT_THROW(io::read_coordinate(in), Error);
}

TEST(MatrixMarket, MalformedInputIsParseError) {
  for (const char* text : {"", "%%MatrixMarket matrix coordinate real general\n2 2\n",
                           "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 3\n",
                           "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 3\n"}) {
    std::istringstream in(text);
    try {
      io::read_coordinate(in);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const Error& e) {
      EXPECT_TRUE(e.kind() == ErrorKind::Parse || e.kind() == ErrorKind::InvalidArgument)
          << text;
    }
  }
}

TEST(MatrixMarket, MissingFileIsIoError) {
  try {
    io::load_coordinate("/nonexistent/dir/x.mtx");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(KeyValues, RoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "optspace_kv_test.txt";
  io::KeyValues kv{{"b", "2"}, {"a", "x y"}};
  io::save_key_values(path, kv);
  EXPECT_EQ(io::load_key_values(path), kv);
  std::filesystem::remove(path);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 0.0, 123456789.125}) {
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(0.1), "0.1");
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(io::fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(io::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(io::hex_digest(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
}
