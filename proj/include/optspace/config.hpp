#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "optspace/observed_matrix.hpp"

namespace optspace::harness {

enum class ExperimentKind { SweepRank, SweepNoise, SweepLambda, TheoryCheck, SingleRun };

const char* to_string(ExperimentKind kind) noexcept;

/// How the noise level of a cell is specified. Exactly one is used per config.
enum class NoiseAxis { Sigma2, Snr, NoiseRatio };

/// Declarative sweep description. Every list is a grid axis; the run covers
/// the Cartesian product in the order m, n, r_true, p, noise, then
/// rank_used and lambda.
///
/// Text form: one `key=value` per line, `#` comments. Repeating a key or
/// giving a comma-separated value appends to that axis.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::SingleRun;

  std::vector<Index> m;
  std::vector<Index> n;
  /// Rank of the factor model. Ignored when `spectrum` is set.
  std::vector<int> r_true;
  /// Prescribed normalized spectrum (spiked model). Not a grid axis.
  std::vector<double> spectrum;
  std::vector<int> rank_used;  ///< empty means "same as the true rank"
  std::vector<double> p;

  NoiseAxis noise_axis = NoiseAxis::Sigma2;
  /// sigma2, SNR, or sigma2 / (p sigma_1^2) values, according to noise_axis.
  std::vector<double> noise;

  std::vector<double> lambda;  ///< empty plus lambda_auto: theory-anchored grid
  bool lambda_auto = false;
  std::vector<double> soft_impute_lambda;

  int replicates = 20;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.2;
  bool fixed_size_mask = false;

  int max_iters = 500;
  double svd_tol = 1e-10;
  int svd_max_iters = 1000;
  int threads = 1;

  std::filesystem::path output = "results.csv";

  /// Throws Error(Config) when a required key is missing or out of range.
  void validate() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` assignment (used by the parser and by CLI flags).
void apply_setting(ExperimentConfig& config, const std::string& key,
                   const std::string& value);

}  // namespace optspace::harness
