#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace optspace::harness {

/// One measured-versus-predicted record. Optional fields are written as empty
/// CSV cells when they do not apply to the row's method.
struct ResultRow {
  std::string kind;
  int cell = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  long long m = 0;
  long long n = 0;
  int r_true = 0;
  int rank_used = 0;
  double p = 0.0;
  double sigma2 = 0.0;
  std::optional<double> snr;
  std::optional<double> noise_ratio;
  std::string method;
  std::optional<double> lambda;
  std::optional<double> shrink;

  std::optional<double> test_error;
  std::optional<double> train_error;
  std::optional<double> rel_fro_error;
  std::vector<double> z_measured;     ///< top singular values of P_E(N) / n
  std::vector<double> overlap_left;   ///< singular values of U^T X (unit frames)
  std::vector<double> overlap_right;  ///< singular values of V^T Y (unit frames)

  std::vector<double> z_theory;
  std::vector<double> a_theory;
  std::vector<double> b_theory;
  std::optional<double> rel_mse_theory;
  std::optional<int> threshold_rank;

  std::optional<int> iterations;
  std::string termination;
  std::string status = "ok";

  /// Not part of the main CSV (it would break byte-level reproducibility);
  /// emitted in the timing sidecar.
  double wall_time_s = 0.0;
};

/// Column names of the main CSV, in output order.
const std::vector<std::string>& csv_columns();

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const ResultRow& row);

/// Header plus one line per row. Numbers carry 17 significant digits.
void emit_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);

/// Parses a file written by emit_csv (wall time is not recovered).
std::vector<ResultRow> parse_csv(std::istream& in);

/// cell, replicate, method, wall_time_s.
void emit_timing(const std::vector<ResultRow>& rows, const std::filesystem::path& path);

/// Mean and standard error per (cell, rank_used, method, fixed lambda).
struct SummaryRow {
  std::string kind;
  int cell = 0;
  long long m = 0;
  long long n = 0;
  int r_true = 0;
  int rank_used = 0;
  double p = 0.0;
  double sigma2 = 0.0;
  std::optional<double> noise_ratio;
  std::string method;
  std::optional<double> lambda;  ///< set for fixed-lambda methods
  int replicates = 0;
  int failures = 0;
  double lambda_mean = 0.0;
  double test_error_mean = 0.0, test_error_se = 0.0;
  double train_error_mean = 0.0, train_error_se = 0.0;
  double rel_fro_error_mean = 0.0, rel_fro_error_se = 0.0;
  std::optional<double> rel_mse_theory_mean;
  bool has_test = false, has_train = false, has_rel_fro = false;
};

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);
void emit_summary(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

/// gnuplot script plotting the summary CSV (referenced by its file name,
/// relative to the script's directory).
void emit_plotscript(const std::vector<ResultRow>& rows, const std::filesystem::path& path,
                     const std::string& summary_csv_name);

}  // namespace optspace::harness
