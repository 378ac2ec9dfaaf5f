#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "optspace/observed_matrix.hpp"
#include "optspace/theory.hpp"

namespace optspace::synth {

enum class MaskKind {
  Bernoulli,  ///< each entry revealed independently with probability p
  FixedSize,  ///< exactly round(p m n) entries, uniformly without replacement
};

struct SynthOptions {
  Index m = 0;
  Index n = 0;
  int r = 1;
  double sigma2 = 0.0;
  double p = 1.0;
  std::uint64_t seed = 0;
  MaskKind mask = MaskKind::Bernoulli;
};

/// A synthetic completion problem: truth M, noise W and the revealed part of
/// N = M + W. `params` carries the normalized spectrum of the realized M.
struct SynthInstance {
  Eigen::MatrixXd truth;
  Eigen::MatrixXd noise;
  /// Orthonormal singular frames of `truth` (U / sqrt(m) and V / sqrt(n)).
  Eigen::MatrixXd left_frame;
  Eigen::MatrixXd right_frame;
  ObservedMatrix observed;
  theory::ModelParams params;
  std::uint64_t seed = 0;
};

/// Factors with i.i.d. N(0, 1) entries, M = U V^T, W_ij ~ N(0, sigma2 sqrt(mn)).
/// Substreams (see Stream): left factor, right factor, noise, mask.
SynthInstance generate(const SynthOptions& options);

/// Same noise and mask model, but M = sqrt(mn) Q_u diag(sigma) Q_v^T with
/// Haar-random orthonormal Q_u, Q_v, so the normalized spectrum is exactly
/// `sigma`. Used to probe the large-system predictions at a prescribed signal.
SynthInstance generate_spiked(Index m, Index n, std::vector<double> sigma,
                              double sigma2, double p, std::uint64_t seed,
                              MaskKind mask = MaskKind::Bernoulli);

/// Noise scale giving the requested SNR = sqrt(Var(M_ij) / Var(W_ij)) for the
/// factor model, where Var(M_ij) = r.
double snr_to_sigma2(double snr, int r, Index m, Index n);

/// ||P_E^perp(M_true - M_hat)||^2 / ||P_E^perp(M_true)||^2.
double test_error(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate,
                  const ObservedMatrix& mask);

/// ||P_E(N - M_hat)||^2 / ||P_E(N)||^2.
double train_error(const ObservedMatrix& observed,
                   const Eigen::MatrixXd& estimate);

/// ||M_hat - M||^2 / ||M||^2.
double rel_fro_error(const Eigen::MatrixXd& truth,
                     const Eigen::MatrixXd& estimate);

/// Writes observed.mtx, truth.mtx, noise.mtx and instance.txt into `dir`.
void save_instance(const std::filesystem::path& dir, const SynthInstance& inst,
                   const SynthOptions& options);

}  // namespace optspace::synth
