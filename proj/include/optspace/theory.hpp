#pragma once

#include <optional>
#include <vector>

namespace optspace::theory {

/// Spectral description of the ground truth in the normalized convention
/// M = U diag(sigma) V^T with U^T U = m I and V^T V = n I, plus the noise and
/// sampling model: W_ij has variance sqrt(m n) * sigma2 and each entry is
/// revealed independently with probability p.
struct ModelParams {
  std::vector<double> sigma;  ///< nonincreasing, positive; size is the rank
  double sigma2 = 0.0;
  double p = 1.0;
  double alpha = 1.0;  ///< aspect ratio m / n
  std::optional<double> m_max;

  int rank() const noexcept { return static_cast<int>(sigma.size()); }

  /// Throws Error(InvalidArgument) when an invariant is violated.
  void validate() const;
};

/// Large-system limits for the top singular triples of the observed matrix.
struct TheoryPrediction {
  std::vector<double> z;  ///< top singular values divided by n
  std::vector<double> a;  ///< left overlaps with the true frame
  std::vector<double> b;  ///< right overlaps with the true frame
  int k = 0;              ///< number of modes above the threshold
  double rel_mse = 1.0;   ///< relative MSE of the optimally shrunk estimate
  double bulk_edge = 0.0;
};

/// Number of leading modes with sigma_i^2 > sigma2 / p. Equality counts as
/// below the threshold.
int threshold_rank(const ModelParams& params);

/// z_i for each mode: the isolated-spike location above the threshold and the
/// noise bulk edge at or below it.
std::vector<double> predict_singular_values(const ModelParams& params);

struct Overlaps {
  std::vector<double> a;
  std::vector<double> b;
};

/// Limits of the alignment between the true and the empirical singular
/// frames; zero for modes at or below the threshold.
Overlaps predict_overlaps(const ModelParams& params);

/// Relative squared Frobenius error ||M_hat - M||^2 / ||M||^2 of the spectral
/// estimate under the optimal shrinkage, in closed form.
double predict_rel_mse(const ModelParams& params);

/// Marcenko-Pastur density with aspect ratio alpha (support
/// [(1 - alpha^-1/2)^2, (1 + alpha^-1/2)^2]). Integrates to min(1, alpha);
/// for alpha < 1 the remaining mass is an atom at zero.
double mp_density(double lambda, double alpha);

/// Largest singular value of the noise part, divided by n.
double bulk_edge(const ModelParams& params);

TheoryPrediction predict(const ModelParams& params);

struct ShrinkageChoice {
  double t_star = 0.0;       ///< multiplier applied to the observed singulars
  double lambda_star = 0.0;  ///< equivalent spectral-step regularization
};

/// Asymptotically optimal shrinkage of the rank-r spectral estimate:
///
///   t* = sqrt(alpha) * sum_{i<=k} sigma_i a_i b_i z_i / ||z||^2,
///   lambda* = 1 / t* - 1.
///
/// This minimizes e(t) = ||sigma||^2 - 2 t S / sqrt(alpha) + t^2 ||z||^2 / alpha
/// (the limit of ||M - t X X^T N^E Y Y^T||_F^2 / (m n)), where S is the sum
/// above. Throws Error(Numerical) when no mode is above the threshold.
ShrinkageChoice theory_lambda(const ModelParams& params);

}  // namespace optspace::theory
