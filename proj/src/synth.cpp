#include "optspace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "optspace/error.hpp"
#include "optspace/matrix_market.hpp"
#include "optspace/random.hpp"

namespace optspace::synth {

namespace {

void check_dims(Index m, Index n, int r, double sigma2, double p) {
  if (m < 1 || n < 1) {
    throw Error(ErrorKind::InvalidArgument, "synth: m and n must be >= 1");
  }
  if (r < 1 || r > std::min(m, n)) {
    throw Error(ErrorKind::InvalidArgument, "synth: rank must lie in [1, min(m, n)]");
  }
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
    throw Error(ErrorKind::InvalidArgument, "synth: sigma2 must be >= 0");
  }
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "synth: p must lie in (0, 1]");
  }
}

Eigen::MatrixXd gaussian(Index rows, Index cols, std::uint64_t seed,
                         double scale = 1.0) {
  Rng rng(seed);
  Eigen::MatrixXd out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = scale * rng.normal();
  }
  return out;
}

Eigen::MatrixXd orthonormal_frame(Index rows, Index cols, std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rows, cols, seed));
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Fixing sign(diag R) > 0 makes the frame Haar distributed.
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Index j = 0; j < cols; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

std::vector<Entry> sample_mask(Index m, Index n, double p, MaskKind kind,
                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Entry> entries;
  if (kind == MaskKind::Bernoulli) {
    entries.reserve(static_cast<std::size_t>(p * m * n * 1.01) + 16);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (p >= 1.0 || rng.uniform() < p) entries.push_back({i, j, 0.0});
      }
    }
    return entries;
  }
  const auto total = static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(n);
  const auto count = static_cast<std::uint64_t>(
      std::llround(p * static_cast<double>(total)));
  std::vector<std::uint64_t> cells(total);
  std::iota(cells.begin(), cells.end(), std::uint64_t{0});
  for (std::uint64_t k = 0; k < count; ++k) {
    std::swap(cells[k], cells[k + rng.below(total - k)]);
  }
  cells.resize(count);
  std::sort(cells.begin(), cells.end());
  entries.reserve(count);
  for (std::uint64_t c : cells) {
    entries.push_back({static_cast<Index>(c / n), static_cast<Index>(c % n), 0.0});
  }
  return entries;
}

SynthInstance assemble(Eigen::MatrixXd truth, double sigma2, double p,
                       MaskKind mask, std::uint64_t seed) {
  const Index m = truth.rows();
  const Index n = truth.cols();
  const double noise_sd = std::sqrt(sigma2 * std::sqrt(double(m) * double(n)));
  SynthInstance inst;
  inst.noise = sigma2 > 0.0
                   ? gaussian(m, n, derive_seed(seed, Stream::Noise), noise_sd)
                   : Eigen::MatrixXd::Zero(m, n);
  std::vector<Entry> entries =
      sample_mask(m, n, p, mask, derive_seed(seed, Stream::Mask));
  for (Entry& e : entries) {
    e.value = truth(e.row, e.col) + inst.noise(e.row, e.col);
  }
  inst.observed = ObservedMatrix(m, n, std::move(entries));
  inst.truth = std::move(truth);
  inst.seed = seed;
  inst.params.sigma2 = sigma2;
  inst.params.p = p;
  inst.params.alpha = double(m) / double(n);
  inst.params.m_max = inst.truth.cwiseAbs().maxCoeff();
  return inst;
}

}  // namespace

SynthInstance generate(const SynthOptions& options) {
  const auto [m, n, r, sigma2, p, seed, mask] = options;
  check_dims(m, n, r, sigma2, p);
  const Eigen::MatrixXd left = gaussian(m, r, derive_seed(seed, Stream::LeftFactor));
  const Eigen::MatrixXd right =
      gaussian(n, r, derive_seed(seed, Stream::RightFactor));
  SynthInstance inst = assemble(left * right.transpose(), sigma2, p, mask, seed);

  // With thin QRs L = Q_l R_l and R = Q_r R_r, the SVD of L R^T follows from
  // the r x r SVD of R_l R_r^T.
  Eigen::HouseholderQR<Eigen::MatrixXd> ql(left), qr(right);
  const Eigen::MatrixXd rl = ql.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rr = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> core(rl * rr.transpose(),
                                         Eigen::ComputeFullU | Eigen::ComputeFullV);
  inst.left_frame = ql.householderQ() * Eigen::MatrixXd::Identity(m, r) * core.matrixU();
  inst.right_frame = qr.householderQ() * Eigen::MatrixXd::Identity(n, r) * core.matrixV();
  const Eigen::VectorXd& sv = core.singularValues();
  const double scale = 1.0 / std::sqrt(double(m) * double(n));
  inst.params.sigma.assign(sv.data(), sv.data() + sv.size());
  for (double& s : inst.params.sigma) s *= scale;
  return inst;
}

SynthInstance generate_spiked(Index m, Index n, std::vector<double> sigma,
                              double sigma2, double p, std::uint64_t seed,
                              MaskKind mask) {
  const int r = static_cast<int>(sigma.size());
  check_dims(m, n, r, sigma2, p);
  theory::ModelParams probe{sigma, sigma2, p, double(m) / double(n), {}};
  probe.validate();

  const Eigen::MatrixXd qu = orthonormal_frame(m, r, derive_seed(seed, Stream::LeftFactor));
  const Eigen::MatrixXd qv = orthonormal_frame(n, r, derive_seed(seed, Stream::RightFactor));
  const Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(sigma.data(), r);
  Eigen::MatrixXd truth =
      std::sqrt(double(m) * double(n)) * qu * s.asDiagonal() * qv.transpose();
  SynthInstance inst = assemble(std::move(truth), sigma2, p, mask, seed);
  inst.left_frame = qu;
  inst.right_frame = qv;
  inst.params.sigma = std::move(sigma);
  return inst;
}

double snr_to_sigma2(double snr, int r, Index m, Index n) {
  if (!(snr > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "snr must be positive");
  }
  return double(r) / (snr * snr * std::sqrt(double(m) * double(n)));
}

double test_error(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate,
                  const ObservedMatrix& mask) {
  if (truth.rows() != mask.rows() || truth.cols() != mask.cols() ||
      estimate.rows() != mask.rows() || estimate.cols() != mask.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "test_error: shapes disagree");
  }
  if (mask.size() == static_cast<std::size_t>(mask.rows() * mask.cols())) {
    throw Error(ErrorKind::InvalidArgument,
                "test_error: every entry is observed (empty complement)");
  }
  const Eigen::ArrayXXd hidden = 1.0 - mask.mask().array();
  const double num = ((truth - estimate).array() * hidden).square().sum();
  const double den = (truth.array() * hidden).square().sum();
  if (!(den > 0.0)) {
    throw Error(ErrorKind::Numerical, "test_error: truth vanishes off the mask");
  }
  return num / den;
}

double train_error(const ObservedMatrix& observed,
                   const Eigen::MatrixXd& estimate) {
  if (estimate.rows() != observed.rows() || estimate.cols() != observed.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "train_error: shapes disagree");
  }
  double num = 0.0, den = 0.0;
  for (const Entry& e : observed.entries()) {
    const double d = e.value - estimate(e.row, e.col);
    num += d * d;
    den += e.value * e.value;
  }
  if (!(den > 0.0)) {
    throw Error(ErrorKind::Numerical, "train_error: observations are all zero");
  }
  return num / den;
}

double rel_fro_error(const Eigen::MatrixXd& truth,
                     const Eigen::MatrixXd& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "rel_fro_error: shapes disagree");
  }
  const double den = truth.squaredNorm();
  if (!(den > 0.0)) {
    throw Error(ErrorKind::Numerical, "rel_fro_error: truth is zero");
  }
  return (estimate - truth).squaredNorm() / den;
}

void save_instance(const std::filesystem::path& dir, const SynthInstance& inst,
                   const SynthOptions& options) {
  std::filesystem::create_directories(dir);
  io::save_coordinate(dir / "observed.mtx", inst.observed);
  io::save_array(dir / "truth.mtx", inst.truth);
  io::save_array(dir / "noise.mtx", inst.noise);
  io::KeyValues kv;
  kv["m"] = std::to_string(options.m);
  kv["n"] = std::to_string(options.n);
  kv["r"] = std::to_string(options.r);
  kv["sigma2"] = io::format_double(options.sigma2);
  kv["p"] = io::format_double(options.p);
  kv["seed"] = std::to_string(options.seed);
  kv["mask"] = options.mask == MaskKind::Bernoulli ? "bernoulli" : "fixed";
  kv["snr"] = options.sigma2 > 0.0
                  ? io::format_double(std::sqrt(
                        double(options.r) /
                        (options.sigma2 *
                         std::sqrt(double(options.m) * double(options.n)))))
                  : "inf";
  kv["observed"] = std::to_string(inst.observed.size());
  std::string sig;
  for (double s : inst.params.sigma) {
    if (!sig.empty()) sig += ';';
    sig += io::format_double(s);
  }
  kv["sigma"] = sig;
  io::save_key_values(dir / "instance.txt", kv);
}

}  // namespace optspace::synth
