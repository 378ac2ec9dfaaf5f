#include "optspace/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "optspace/error.hpp"
#include "optspace/random.hpp"

namespace optspace {

namespace {

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& a) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
}

void fix_signs(SvdTriple& t) {
  for (Index j = 0; j < t.left.cols(); ++j) {
    Index at = 0;
    t.left.col(j).cwiseAbs().maxCoeff(&at);
    if (t.left(at, j) < 0.0) {
      t.left.col(j) = -t.left.col(j);
      t.right.col(j) = -t.right.col(j);
    }
  }
}

}  // namespace

Eigen::MatrixXd reconstruct(const Factorization& f) {
  return f.X * f.S * f.Y.transpose();
}

SvdResult truncated_svd(const ObservedMatrix& obs, int r,
                        const SvdOptions& options) {
  const Index m = obs.rows();
  const Index n = obs.cols();
  if (r < 1 || r > std::min(m, n)) {
    throw Error(ErrorKind::InvalidArgument,
                "truncated_svd: rank " + std::to_string(r) +
                    " outside [1, min(m, n)]");
  }
  if (!(obs.squared_norm() > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "truncated_svd: matrix is zero");
  }
  const Index block =
      std::min<Index>(std::min(m, n), r + std::max(0, options.oversample));

  Rng rng(derive_seed(options.seed, Stream::SvdStart));
  Eigen::MatrixXd start(n, block);
  for (Index j = 0; j < block; ++j) {
    for (Index i = 0; i < n; ++i) start(i, j) = rng.normal();
  }
  Eigen::MatrixXd v = thin_q(start);

  SvdResult best;
  best.residual = std::numeric_limits<double>::infinity();
  const int max_iters = std::max(1, options.max_iters);
  for (int it = 1; it <= max_iters; ++it) {
    // Rayleigh-Ritz on span(v): A v = P diag(s) Q^T.
    const Eigen::MatrixXd av = obs.multiply(v);
    Eigen::BDCSVD<Eigen::MatrixXd> small(av, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::MatrixXd& p = small.matrixU();
    const Eigen::VectorXd& s = small.singularValues();
    const Eigen::MatrixXd ritz_right = v * small.matrixV();

    // A^T p spans the next subspace; its first r columns also give the
    // residuals, since A^T A v_i - s_i^2 v_i = s_i (A^T u_i - s_i v_i).
    const Eigen::MatrixXd atp = obs.multiply_transpose(p);
    const double top = s(0) * s(0);
    double worst = 0.0;
    for (int i = 0; i < r; ++i) {
      const double res =
          s(i) * (atp.col(i) - s(i) * ritz_right.col(i)).norm() / top;
      worst = std::max(worst, res);
    }
    if (worst < best.residual) {
      best.residual = worst;
      best.iterations = it;
      best.triple.left = p.leftCols(r);
      best.triple.singulars = s.head(r);
      best.triple.right = ritz_right.leftCols(r);
    }
    if (worst <= options.tol) {
      best.converged = true;
      best.iterations = it;
      break;
    }
    v = thin_q(atp);
  }
  fix_signs(best.triple);
  return best;
}

Shrinkage Shrinkage::from_lambda(double lambda) {
  if (!(lambda > -1.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidArgument,
                "spectral shrinkage: lambda must be finite and > -1");
  }
  return Shrinkage(1.0 / (1.0 + lambda));
}

Shrinkage Shrinkage::from_factor(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw Error(ErrorKind::InvalidArgument,
                "spectral shrinkage: factor must be finite and > 0");
  }
  return Shrinkage(t);
}

Factorization spectral_estimate(const SvdTriple& svd, Shrinkage shrink) {
  Factorization f;
  f.X = svd.left;
  f.Y = svd.right;
  f.S = (shrink.factor() * svd.singulars).asDiagonal();
  return f;
}

Factorization spectral_estimate(const ObservedMatrix& obs, int r,
                                Shrinkage shrink, const SvdOptions& options) {
  return spectral_estimate(truncated_svd(obs, r, options).triple, shrink);
}

SoftImputeResult soft_impute_baseline(const ObservedMatrix& obs,
                                      double lambda_nn,
                                      const SoftImputeOptions& options) {
  if (obs.empty()) {
    throw Error(ErrorKind::InvalidArgument, "soft_impute: no observations");
  }
  if (!(lambda_nn >= 0.0) || !std::isfinite(lambda_nn)) {
    throw Error(ErrorKind::InvalidArgument, "soft_impute: lambda must be >= 0");
  }
  SoftImputeResult out;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(obs.rows(), obs.cols());
  for (int it = 1; it <= options.max_iters; ++it) {
    Eigen::MatrixXd filled = z;
    for (const Entry& e : obs.entries()) filled(e.row, e.col) = e.value;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(filled,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd shrunk =
        (svd.singularValues().array() - lambda_nn).max(0.0).matrix();
    int rank = 0;
    while (rank < shrunk.size() && shrunk(rank) > 0.0) ++rank;
    Eigen::MatrixXd next = svd.matrixU().leftCols(rank) *
                           shrunk.head(rank).asDiagonal() *
                           svd.matrixV().leftCols(rank).transpose();

    const double base = z.norm();
    const double change = (next - z).norm();
    z = std::move(next);
    out.iterations = it;
    out.rank = rank;
    if (base > 0.0 ? change / base < options.tol : change == 0.0) {
      out.converged = true;
      break;
    }
  }
  out.completed = std::move(z);
  return out;
}

}  // namespace optspace
