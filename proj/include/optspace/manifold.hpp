#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "optspace/observed_matrix.hpp"
#include "optspace/spectral.hpp"

namespace optspace::manifold {

// Cost minimized here:
//   F(X, Y; S) = 1/2 ||P_E(N - X S Y^T)||_F^2 + lambda/2 ||S||_F^2
// over X (m x r), Y (n x r) with orthonormal columns and an r x r core S.

struct DescentOptions {
  double lambda = 0.0;
  int max_iters = 500;
  /// Absolute gradient-norm tolerance; defaults to 1e-7 * ||P_E(N)||_F.
  std::optional<double> grad_tol;
  double cost_rel_tol = 1e-9;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double initial_step = 1.0;

  void validate() const;
};

enum class Termination {
  GradientTolerance,
  CostStalled,
  MaxIterations,
  LineSearchFailed,
};

const char* to_string(Termination t) noexcept;

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct DescentTrace {
  std::vector<IterationRecord> records;
  Termination reason = Termination::MaxIterations;
};

struct CoreSolution {
  Eigen::MatrixXd S;
  /// True when the normal equations were singular and the least-norm
  /// solution was returned instead.
  bool least_norm = false;
  /// ||A s - b|| / ||b|| for the r^2 x r^2 normal equations.
  double relative_residual = 0.0;
};

/// Exact minimizer of F over S with the frames fixed.
CoreSolution solve_S(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                     const ObservedMatrix& obs, double lambda);

double cost(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
            const Eigen::MatrixXd& S, const ObservedMatrix& obs, double lambda);

struct TangentPair {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;

  double squared_norm() const { return X.squaredNorm() + Y.squaredNorm(); }
};

/// Euclidean gradient of F in (X, Y) at fixed S:
/// dF/dX = -R Y S^T, dF/dY = -R^T X S with R = P_E(N - X S Y^T).
TangentPair euclidean_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                               const Eigen::MatrixXd& S, const ObservedMatrix& obs);

/// Projection of the Euclidean gradient onto the Stiefel tangent spaces:
/// G = (I - X X^T) D + X skew(X^T D).
TangentPair riemannian_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                const Eigen::MatrixXd& S, const ObservedMatrix& obs,
                                double lambda);

/// Tangent-space projection at X.
Eigen::MatrixXd project_tangent(const Eigen::MatrixXd& X, const Eigen::MatrixXd& D);

/// QR retraction: the Q factor of X + V with a positive diagonal in R.
Eigen::MatrixXd retract(const Eigen::MatrixXd& X, const Eigen::MatrixXd& V);

struct DescentResult {
  Factorization factors;
  DescentTrace trace;
};

/// Riemannian gradient descent from `init`. Each iteration re-solves S (directly
/// for r <= 4, otherwise by conjugate gradient warm-started at the previous core,
/// to a 1e-6 relative residual), then takes an Armijo backtracking step along the negative Riemannian
/// gradient (S held fixed during the search) with QR retraction.
DescentResult descend(const Factorization& init, const ObservedMatrix& obs,
                      const DescentOptions& options = {});

}  // namespace optspace::manifold
