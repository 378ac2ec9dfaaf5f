#include "optspace/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "optspace/error.hpp"

namespace optspace::io {

namespace {

constexpr const char* kCoordinateBanner =
    "%%MatrixMarket matrix coordinate real general";
constexpr const char* kArrayBanner = "%%MatrixMarket matrix array real general";

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

void expect_banner(std::istream& in, const std::string& format) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::Parse, "MatrixMarket: empty input");
  }
  std::istringstream words(lower(line));
  std::string tag, object, fmt, field, symmetry;
  words >> tag >> object >> fmt >> field >> symmetry;
  if (tag != "%%matrixmarket" || object != "matrix") {
    throw Error(ErrorKind::Parse, "MatrixMarket: missing banner");
  }
  if (fmt != format) {
    throw Error(ErrorKind::Parse,
                "MatrixMarket: expected " + format + " format, got " + fmt);
  }
  if (field != "real" && field != "double" && field != "integer") {
    throw Error(ErrorKind::Parse, "MatrixMarket: unsupported field " + field);
  }
  if (symmetry != "general") {
    throw Error(ErrorKind::Parse,
                "MatrixMarket: unsupported symmetry " + symmetry);
  }
}

// Next line that is neither blank nor a comment.
bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') continue;
    return true;
  }
  return false;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  return in;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
  }
  return std::string(buf, end);
}

void write_coordinate(std::ostream& out, const ObservedMatrix& obs) {
  out << kCoordinateBanner << '\n'
      << obs.rows() << ' ' << obs.cols() << ' ' << obs.size() << '\n';
  for (const Entry& e : obs.entries()) {
    out << e.row + 1 << ' ' << e.col + 1 << ' ' << format_double(e.value)
        << '\n';
  }
}

ObservedMatrix read_coordinate(std::istream& in) {
  expect_banner(in, "coordinate");
  std::string line;
  if (!next_data_line(in, line)) {
    throw Error(ErrorKind::Parse, "MatrixMarket: missing size line");
  }
  Index rows = 0, cols = 0;
  long long count = 0;
  {
    std::istringstream header(line);
    if (!(header >> rows >> cols >> count) || rows < 0 || cols < 0 ||
        count < 0) {
      throw Error(ErrorKind::Parse, "MatrixMarket: bad size line '" + line + "'");
    }
  }
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(count));
  for (long long k = 0; k < count; ++k) {
    if (!next_data_line(in, line)) {
      throw Error(ErrorKind::Parse, "MatrixMarket: expected " +
                                        std::to_string(count) + " entries, got " +
                                        std::to_string(k));
    }
    std::istringstream fields(line);
    long long i = 0, j = 0;
    double v = 0.0;
    if (!(fields >> i >> j >> v)) {
      throw Error(ErrorKind::Parse, "MatrixMarket: bad entry '" + line + "'");
    }
    entries.push_back({static_cast<Index>(i - 1), static_cast<Index>(j - 1), v});
  }
  return ObservedMatrix(rows, cols, std::move(entries));
}

void write_array(std::ostream& out, const Eigen::MatrixXd& dense) {
  out << kArrayBanner << '\n' << dense.rows() << ' ' << dense.cols() << '\n';
  for (Index j = 0; j < dense.cols(); ++j) {
    for (Index i = 0; i < dense.rows(); ++i) {
      out << format_double(dense(i, j)) << '\n';
    }
  }
}

Eigen::MatrixXd read_array(std::istream& in) {
  expect_banner(in, "array");
  std::string line;
  if (!next_data_line(in, line)) {
    throw Error(ErrorKind::Parse, "MatrixMarket: missing size line");
  }
  Index rows = 0, cols = 0;
  {
    std::istringstream header(line);
    if (!(header >> rows >> cols) || rows < 0 || cols < 0) {
      throw Error(ErrorKind::Parse, "MatrixMarket: bad size line '" + line + "'");
    }
  }
  Eigen::MatrixXd dense(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      if (!next_data_line(in, line)) {
        throw Error(ErrorKind::Parse, "MatrixMarket: truncated array data");
      }
      std::istringstream field(line);
      if (!(field >> dense(i, j))) {
        throw Error(ErrorKind::Parse, "MatrixMarket: bad value '" + line + "'");
      }
    }
  }
  return dense;
}

void save_coordinate(const std::filesystem::path& path,
                     const ObservedMatrix& obs) {
  auto out = open_out(path);
  write_coordinate(out, obs);
}

ObservedMatrix load_coordinate(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_coordinate(in);
}

void save_array(const std::filesystem::path& path,
                const Eigen::MatrixXd& dense) {
  auto out = open_out(path);
  write_array(out, dense);
}

Eigen::MatrixXd load_array(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_array(in);
}

void save_key_values(const std::filesystem::path& path, const KeyValues& kv) {
  auto out = open_out(path);
  for (const auto& [key, value] : kv) out << key << '=' << value << '\n';
}

KeyValues load_key_values(const std::filesystem::path& path) {
  auto in = open_in(path);
  KeyValues kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Parse, "key=value: bad line '" + line + "'");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string hex_digest(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace optspace::io
