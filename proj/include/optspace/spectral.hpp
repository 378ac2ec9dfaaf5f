#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "optspace/observed_matrix.hpp"

namespace optspace {

/// Rank-r factorization X S Y^T with orthonormal frames X (m x r), Y (n x r)
/// and an r x r core S.
struct Factorization {
  Eigen::MatrixXd X;
  Eigen::MatrixXd S;
  Eigen::MatrixXd Y;

  int rank() const noexcept { return static_cast<int>(X.cols()); }
};

/// X S Y^T.
Eigen::MatrixXd reconstruct(const Factorization& f);

/// Top singular triples: left (m x r), singulars (nonincreasing), right (n x r).
struct SvdTriple {
  Eigen::MatrixXd left;
  Eigen::VectorXd singulars;
  Eigen::MatrixXd right;
};

struct SvdOptions {
  /// Accept once ||A^T A v - s^2 v|| <= tol * s_1^2 for every returned vector.
  double tol = 1e-10;
  int max_iters = 1000;
  std::uint64_t seed = 0;
  /// Extra subspace columns beyond r; they speed up convergence.
  int oversample = 10;
};

struct SvdResult {
  SvdTriple triple;
  int iterations = 0;
  bool converged = false;
  /// max_i ||A^T A v_i - s_i^2 v_i|| / s_1^2 at the returned iterate.
  double residual = 0.0;
};

/// Top-r SVD of the sparse observation matrix by block power iteration with
/// Rayleigh-Ritz extraction from a seeded Gaussian start.
///
/// Non-convergence within max_iters is not an error: the iterate with the
/// smallest residual is returned with converged = false. Each left singular
/// vector is signed so that its largest-magnitude entry is positive (the
/// paired right vector follows).
SvdResult truncated_svd(const ObservedMatrix& obs, int r,
                        const SvdOptions& options = {});

/// Shrinkage of the spectral estimate, S = diag(s) / (1 + lambda) = t diag(s).
/// Either parameter may be given; lambda > -1 corresponds to t > 0.
class Shrinkage {
 public:
  static Shrinkage from_lambda(double lambda);
  static Shrinkage from_factor(double t);

  double lambda() const noexcept { return 1.0 / factor_ - 1.0; }
  double factor() const noexcept { return factor_; }

 private:
  explicit Shrinkage(double t) : factor_(t) {}
  double factor_;
};

/// Minimizer of (1/2)||P_E(N) - X S Y^T||_F^2 + (lambda/2)||S||_F^2 over
/// orthonormal X, Y and any S: the top-r singular frames of P_E(N) and
/// S = X^T P_E(N) Y / (1 + lambda).
Factorization spectral_estimate(const ObservedMatrix& obs, int r,
                                Shrinkage shrink,
                                const SvdOptions& options = {});

/// Same, reusing an already computed SVD (frames do not depend on lambda).
Factorization spectral_estimate(const SvdTriple& svd, Shrinkage shrink);

struct SoftImputeOptions {
  double tol = 1e-5;
  int max_iters = 500;
};

struct SoftImputeResult {
  Eigen::MatrixXd completed;
  int iterations = 0;
  bool converged = false;
  int rank = 0;
};

/// Soft-Impute: iterate Z <- SVT_lambda(P_E(N) + P_E^perp(Z)) from Z = 0 until
/// ||Z_new - Z||_F / ||Z||_F < tol, soft-thresholding singular values by
/// lambda_nn. Hitting max_iters is reported through `converged`.
SoftImputeResult soft_impute_baseline(const ObservedMatrix& obs,
                                      double lambda_nn,
                                      const SoftImputeOptions& options = {});

}  // namespace optspace
