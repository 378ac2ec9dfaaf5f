#pragma once

#include <filesystem>
#include <iosfwd>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "optspace/observed_matrix.hpp"

namespace optspace::io {

// MatrixMarket "coordinate real general" for observations (1-based indices,
// header line `m n nnz`) and "array real general" for dense matrices
// (column-major, header line `m n`). Values are written with 17 significant
// digits so that reading back reproduces every double exactly.

void write_coordinate(std::ostream& out, const ObservedMatrix& obs);
ObservedMatrix read_coordinate(std::istream& in);

void write_array(std::ostream& out, const Eigen::MatrixXd& dense);
Eigen::MatrixXd read_array(std::istream& in);

void save_coordinate(const std::filesystem::path& path,
                     const ObservedMatrix& obs);
ObservedMatrix load_coordinate(const std::filesystem::path& path);

void save_array(const std::filesystem::path& path, const Eigen::MatrixXd& dense);
Eigen::MatrixXd load_array(const std::filesystem::path& path);

/// Flat `key=value` sidecar files. Keys are written in sorted order.
using KeyValues = std::map<std::string, std::string>;
void save_key_values(const std::filesystem::path& path, const KeyValues& kv);
KeyValues load_key_values(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// 64-bit FNV-1a digest, used for provenance stamps in manifests.
std::uint64_t fnv1a(std::string_view bytes,
                    std::uint64_t state = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t digest);

}  // namespace optspace::io
