#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "optspace/config.hpp"
#include "optspace/csv.hpp"
#include "optspace/manifold.hpp"
#include "optspace/observed_matrix.hpp"
#include "optspace/spectral.hpp"
#include "optspace/theory.hpp"

namespace optspace::harness {

struct PipelineOptions {
  /// Step-3 settings. Its `lambda` is overwritten by the lambda_descent
  /// argument of run_optspace. max_iters = 0 skips step 3 entirely.
  manifold::DescentOptions descent;
  SvdOptions svd;
  double trim_factor = kDefaultTrimFactor;
};

struct OptSpaceResult {
  Factorization factors;
  Factorization spectral;
  manifold::DescentTrace trace;
  SvdTriple svd;  ///< top-r SVD of the trimmed observations
  bool svd_converged = false;
  std::size_t trimmed_entries = 0;  ///< |E| - |E_trimmed|
};

/// Trim, spectral estimate with shrinkage 1 / (1 + lambda_spectral), then
/// gradient descent on the regularized cost with lambda_descent over the full
/// (untrimmed) observations. Errors carry the failing stage in the message.
OptSpaceResult run_optspace(const ObservedMatrix& obs, int rank, double lambda_spectral,
                            double lambda_descent, const PipelineOptions& options = {});

struct LambdaScore {
  double lambda = 0.0;
  double holdout_error = 0.0;  ///< ||P_V(N - M_hat)||^2 / ||P_V(N)||^2
  bool ok = false;
  std::string status;
};

struct LambdaSelection {
  double lambda_star = 0.0;
  std::vector<LambdaScore> table;
};

/// Holds out a random fraction of the entries, runs the pipeline on the rest
/// for each lambda (used for both steps) and returns the lambda with the
/// smallest holdout error; ties go to the smaller lambda.
LambdaSelection select_lambda(const ObservedMatrix& obs, int rank,
                              const std::vector<double>& grid, double holdout_fraction,
                              std::uint64_t seed, const PipelineOptions& options = {});

/// Theory-anchored lambda grid for the descent step: anchor * {0, 1/4, 1/2,
/// 1, 2, 4}, always including 0. The anchor is 1/t* - p, the step-3 lambda
/// whose exact core matches the optimal spectral shrinkage t* when the
/// sampled normal equations are approximated by p I. Falls back to p when
/// t* is undefined or the anchor is not positive.
std::vector<double> default_lambda_grid(const theory::ModelParams& params);

/// Runs every (cell, replicate) of the config and returns rows in grid
/// order. `on_row` (optional) receives rows as soon as they are final, in
/// the same order.
std::vector<ResultRow> run(const ExperimentConfig& config,
                           const std::function<void(const ResultRow&)>& on_row = {});

/// run() plus CSV, summary, timing and plot-script outputs next to
/// config.output. Returns the rows.
std::vector<ResultRow> run_and_write(const ExperimentConfig& config);

}  // namespace optspace::harness
