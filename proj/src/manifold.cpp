#include "optspace/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "optspace/error.hpp"

namespace optspace::manifold {

namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_shapes(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                  const ObservedMatrix& obs) {
  if (X.rows() != obs.rows() || Y.rows() != obs.cols() || X.cols() != Y.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "frames do not match the observation matrix");
  }
}

// Residual N_ij - (X S Y^T)_ij on every observed entry, in entry order.
std::vector<double> residuals(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                              const Eigen::MatrixXd& S, const ObservedMatrix& obs) {
  const RowMajor xs = X * S;
  const RowMajor y = Y;
  std::vector<double> out;
  out.reserve(obs.size());
  for (const Entry& e : obs.entries()) {
    out.push_back(e.value - xs.row(e.row).dot(y.row(e.col)));
  }
  return out;
}

double half_sum_squares(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return 0.5 * sum;
}

Eigen::MatrixXd skew(const Eigen::MatrixXd& a) {
  return 0.5 * (a - a.transpose());
}

// Above this rank the dense r^2 x r^2 factorization costs more than a
// warm-started matrix-free conjugate gradient on the same normal equations.
constexpr Index kDirectCoreRank = 4;

// Per-row Gram blocks G_i = sum_{j in E_i} y_j y_j^T, stacked as m blocks of r x r.
Eigen::MatrixXd row_grams(const ObservedMatrix& obs, const Eigen::MatrixXd& Y) {
  const Index r = Y.cols();
  Eigen::MatrixXd grams = Eigen::MatrixXd::Zero(r, r * obs.rows());
  Eigen::MatrixXd gathered;
  const auto entries = obs.entries();
  for (std::size_t k = 0; k < entries.size();) {
    const Index row = entries[k].row;
    std::size_t end = k;
    while (end < entries.size() && entries[end].row == row) ++end;
    gathered.resize(r, static_cast<Index>(end - k));
    for (std::size_t t = k; t < end; ++t) {
      gathered.col(static_cast<Index>(t - k)) = Y.row(entries[t].col).transpose();
    }
    grams.middleCols(row * r, r).noalias() = gathered * gathered.transpose();
    k = end;
  }
  return grams;
}

// S -> X^T P_E(X S Y^T) Y + lambda S. Row i of P_E(X S Y^T) Y is G_i (X S)_i.
Eigen::MatrixXd apply_normal(const Eigen::MatrixXd& grams, const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& S, double lambda) {
  const Index r = X.cols();
  const Eigen::MatrixXd xs_t = (X * S).transpose();
  Eigen::MatrixXd acc_t(r, X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    acc_t.col(i).noalias() = grams.middleCols(i * r, r) * xs_t.col(i);
  }
  return X.transpose() * acc_t.transpose() + lambda * S;
}

// Conjugate gradient from `start`; empty result when it fails to converge.
std::optional<Eigen::MatrixXd> core_by_cg(const Eigen::MatrixXd& X,
                                          const Eigen::MatrixXd& Y,
                                          const ObservedMatrix& obs, double lambda,
                                          const Eigen::MatrixXd& start) {
  const Eigen::MatrixXd grams = row_grams(obs, Y);
  const Eigen::MatrixXd rhs = X.transpose() * obs.multiply(Y);
  const double target = 1e-12 * rhs.squaredNorm();
  Eigen::MatrixXd S = start;
  Eigen::MatrixXd res = rhs - apply_normal(grams, X, S, lambda);
  Eigen::MatrixXd dir = res;
  double rr = res.squaredNorm();
  const Index limit = 2 * X.cols() * X.cols();
  for (Index it = 0; it < limit && rr > target; ++it) {
    const Eigen::MatrixXd ad = apply_normal(grams, X, dir, lambda);
    const double curvature = (dir.array() * ad.array()).sum();
    if (!(curvature > 0.0)) return std::nullopt;
    const double step = rr / curvature;
    S += step * dir;
    res -= step * ad;
    const double rr_next = res.squaredNorm();
    dir = res + (rr_next / rr) * dir;
    rr = rr_next;
  }
  if (!(rr <= target)) return std::nullopt;
  return S;
}

Eigen::MatrixXd next_core(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                          const ObservedMatrix& obs, double lambda,
                          const Eigen::MatrixXd& previous) {
  if (X.cols() > kDirectCoreRank) {
    if (auto S = core_by_cg(X, Y, obs, lambda, previous)) return std::move(*S);
  }
  return solve_S(X, Y, obs, lambda).S;
}

}  // namespace

void DescentOptions::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidArgument, "descent: lambda must be >= 0");
  }
  if (max_iters < 0) {
    throw Error(ErrorKind::InvalidArgument, "descent: max_iters must be >= 0");
  }
  if (grad_tol && !(*grad_tol >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "descent: grad_tol must be >= 0");
  }
  if (!(cost_rel_tol >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "descent: cost_rel_tol must be >= 0");
  }
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "descent: armijo_c must lie in (0, 1)");
  }
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "descent: backtrack_factor must lie in (0, 1)");
  }
  if (!(initial_step > 0.0) || !std::isfinite(initial_step)) {
    throw Error(ErrorKind::InvalidArgument, "descent: initial_step must be > 0");
  }
}

const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::CostStalled: return "cost_stalled";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::LineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

CoreSolution solve_S(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                     const ObservedMatrix& obs, double lambda) {
  check_shapes(X, Y, obs);
  if (!(lambda >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "solve_S: lambda must be >= 0");
  }
  const Index r = X.cols();
  const Index dim = r * r;

  // Normal equations in vec(S) with index a * r + b:
  //   A = sum_i (x_i x_i^T) kron (sum_{j in E_i} y_j y_j^T) + lambda I,
  //   b = vec(X^T P_E(N) Y).
  // Entries are sorted by row, so each row's Gram block is built once.
  const RowMajor y = Y;
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd gram(r, r);
  const auto entries = obs.entries();
  for (std::size_t k = 0; k < entries.size();) {
    const Index row = entries[k].row;
    gram.setZero();
    for (; k < entries.size() && entries[k].row == row; ++k) {
      const auto yj = y.row(entries[k].col);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(yj.transpose());
    }
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    for (Index a = 0; a < r; ++a) {
      for (Index c = 0; c <= a; ++c) {
        const double w = X(row, a) * X(row, c);
        if (w == 0.0) continue;
        system.block(a * r, c * r, r, r).noalias() += w * gram;
      }
    }
  }
  // Fill the upper blocks from the lower ones.
  for (Index a = 0; a < r; ++a) {
    for (Index c = a + 1; c < r; ++c) {
      system.block(a * r, c * r, r, r) = system.block(c * r, a * r, r, r).transpose();
    }
  }
  system.diagonal().array() += lambda;

  const Eigen::MatrixXd projected = X.transpose() * obs.multiply(Y);
  Eigen::VectorXd rhs(dim);
  for (Index a = 0; a < r; ++a) {
    for (Index b = 0; b < r; ++b) rhs(a * r + b) = projected(a, b);
  }

  CoreSolution out;
  Eigen::VectorXd sol;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
  const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
  const bool regular = ldlt.info() == Eigen::Success && pivots.size() > 0 &&
                       pivots.minCoeff() > 1e-12 * pivots.maxCoeff() &&
                       ldlt.rcond() > 1e-12;
  if (regular) {
    sol = ldlt.solve(rhs);
  } else {
    out.least_norm = true;
    sol = system.completeOrthogonalDecomposition().solve(rhs);
  }
  const double scale = rhs.norm();
  out.relative_residual =
      scale > 0.0 ? (system * sol - rhs).norm() / scale : (system * sol).norm();
  out.S.resize(r, r);
  for (Index a = 0; a < r; ++a) {
    for (Index b = 0; b < r; ++b) out.S(a, b) = sol(a * r + b);
  }
  return out;
}

double cost(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
            const Eigen::MatrixXd& S, const ObservedMatrix& obs, double lambda) {
  check_shapes(X, Y, obs);
  if (S.rows() != X.cols() || S.cols() != Y.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "cost: core has wrong shape");
  }
  return half_sum_squares(residuals(X, Y, S, obs)) + 0.5 * lambda * S.squaredNorm();
}

namespace {

struct Evaluation {
  double cost = 0.0;
  TangentPair euclidean;
};

// Cost and Euclidean gradient from a single pass over the residuals.
Evaluation evaluate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                    const Eigen::MatrixXd& S, const ObservedMatrix& obs, double lambda) {
  // -R Y S^T and -R^T X S with R = P_E(N - X S Y^T).
  const RowMajor xs = X * S;
  const RowMajor y = Y;
  const RowMajor ys = Y * S.transpose();
  RowMajor gx = RowMajor::Zero(X.rows(), X.cols());
  RowMajor gy = RowMajor::Zero(Y.rows(), Y.cols());
  double sum = 0.0;
  for (const Entry& e : obs.entries()) {
    const double res = e.value - xs.row(e.row).dot(y.row(e.col));
    sum += res * res;
    gx.row(e.row) -= res * ys.row(e.col);
    gy.row(e.col) -= res * xs.row(e.row);
  }
  return {0.5 * sum + 0.5 * lambda * S.squaredNorm(), {gx, gy}};
}

TangentPair project(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                    const TangentPair& euclidean) {
  return {project_tangent(X, euclidean.X), project_tangent(Y, euclidean.Y)};
}

}  // namespace

TangentPair euclidean_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                               const Eigen::MatrixXd& S, const ObservedMatrix& obs) {
  check_shapes(X, Y, obs);
  return evaluate(X, Y, S, obs, 0.0).euclidean;
}

Eigen::MatrixXd project_tangent(const Eigen::MatrixXd& X, const Eigen::MatrixXd& D) {
  const Eigen::MatrixXd xtd = X.transpose() * D;
  return D - X * xtd + X * skew(xtd);
}

TangentPair riemannian_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                const Eigen::MatrixXd& S, const ObservedMatrix& obs,
                                double /*lambda: the penalty does not involve X, Y*/) {
  TangentPair d = euclidean_gradient(X, Y, S, obs);
  return {project_tangent(X, d.X), project_tangent(Y, d.Y)};
}

Eigen::MatrixXd retract(const Eigen::MatrixXd& X, const Eigen::MatrixXd& V) {
  const Eigen::MatrixXd moved = X + V;
  // Cholesky QR: moved = Q R with R^T R = moved^T moved, which already has a
  // positive diagonal. Well conditioned whenever the step is moderate.
  const Eigen::LLT<Eigen::MatrixXd> llt(moved.transpose() * moved);
  if (llt.info() == Eigen::Success) {
    const auto diag = llt.matrixL().toDenseMatrix().diagonal();
    if (diag.minCoeff() > 1e-4 * diag.maxCoeff()) {
      Eigen::MatrixXd q = llt.matrixU().solve<Eigen::OnTheRight>(moved);
      // One refinement pass restores orthonormality to rounding level.
      const Eigen::LLT<Eigen::MatrixXd> again(q.transpose() * q);
      if (again.info() == Eigen::Success) {
        return again.matrixU().solve<Eigen::OnTheRight>(q);
      }
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(moved);
  Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(moved.rows(), moved.cols());
  const Eigen::MatrixXd& packed = qr.matrixQR();
  for (Index j = 0; j < moved.cols(); ++j) {
    if (packed(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

DescentResult descend(const Factorization& init, const ObservedMatrix& obs,
                      const DescentOptions& options) {
  options.validate();
  check_shapes(init.X, init.Y, obs);
  const double lambda = options.lambda;
  const double grad_tol =
      options.grad_tol.value_or(1e-7 * std::sqrt(obs.squared_norm()));

  DescentResult out;
  Eigen::MatrixXd X = init.X;
  Eigen::MatrixXd Y = init.Y;
  Eigen::MatrixXd S = init.S.rows() == X.cols() && init.S.cols() == Y.cols()
                          ? next_core(X, Y, obs, lambda, init.S)
                          : solve_S(X, Y, obs, lambda).S;
  Evaluation current = evaluate(X, Y, S, obs, lambda);
  double f = current.cost;

  auto& trace = out.trace;
  double step = options.initial_step;
  TangentPair g_prev;
  double step_prev = 0.0;
  for (int it = 0;; ++it) {
    const TangentPair g = project(X, Y, current.euclidean);
    const double g2 = g.squared_norm();
    if (it > 0) {
      // Barzilai-Borwein trial step from the last displacement -step_prev g_prev.
      const double sy = -step_prev * ((g_prev.X.array() * (g.X - g_prev.X).array()).sum() +
                                      (g_prev.Y.array() * (g.Y - g_prev.Y).array()).sum());
      const double ss = step_prev * step_prev * g_prev.squared_norm();
      if (sy > 0.0 && std::isfinite(ss / sy)) step = ss / sy;
    }
    const double gnorm = std::sqrt(g2);
    if (it == 0) trace.records.push_back({0, f, gnorm, 0.0});
    else trace.records.back().grad_norm = gnorm;

    if (gnorm <= grad_tol) {
      trace.reason = Termination::GradientTolerance;
      break;
    }
    if (it >= options.max_iters) {
      trace.reason = Termination::MaxIterations;
      break;
    }

    // Backtracking from a step that may grow back after earlier cuts.
    const double floor =
        std::numeric_limits<double>::epsilon() * (X.norm() + Y.norm());
    Eigen::MatrixXd x_next, y_next;
    double f_trial = f;
    bool accepted = false;
    while (step * gnorm > floor) {
      x_next = retract(X, -step * g.X);
      y_next = retract(Y, -step * g.Y);
      f_trial = cost(x_next, y_next, S, obs, lambda);
      if (f_trial <= f - options.armijo_c * step * g2) {
        accepted = true;
        break;
      }
      step *= options.backtrack_factor;
    }
    if (!accepted) {
      trace.reason = Termination::LineSearchFailed;
      break;
    }

    X = std::move(x_next);
    Y = std::move(y_next);
    // The exact core can only lower the cost; keep the search core if
    // rounding says otherwise so the recorded costs stay monotone.
    Eigen::MatrixXd s_next = next_core(X, Y, obs, lambda, S);
    Evaluation next = evaluate(X, Y, s_next, obs, lambda);
    if (next.cost <= f_trial) {
      S = std::move(s_next);
    } else {
      next = evaluate(X, Y, S, obs, lambda);
      next.cost = std::min(next.cost, f_trial);
    }
    const double f_next = next.cost;
    current = std::move(next);
    const double decrease = f - f_next;
    f = f_next;
    trace.records.push_back({it + 1, f, 0.0, step});
    g_prev = g;
    step_prev = step;
    step /= options.backtrack_factor;

    if (decrease <= options.cost_rel_tol * std::abs(f + decrease)) {
      trace.reason = Termination::CostStalled;
      // Fill in the gradient norm of the final iterate.
      const TangentPair last = project(X, Y, current.euclidean);
      trace.records.back().grad_norm = std::sqrt(last.squared_norm());
      break;
    }
  }
  out.factors = {std::move(X), std::move(S), std::move(Y)};
  return out;
}

}  // namespace optspace::manifold
