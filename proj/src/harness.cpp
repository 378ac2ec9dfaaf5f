#include "optspace/harness.hpp"

#include <atomic>
#include <fstream>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "optspace/error.hpp"
#include "optspace/random.hpp"
#include "optspace/synth.hpp"

namespace optspace::harness {

namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Fn>
auto with_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(stage) + ": " + e.what());
  }
}

// ||P_V(N - X S Y^T)||^2 / ||P_V(N)||^2 without forming the dense estimate.
double holdout_error(const Factorization& f, const ObservedMatrix& validation) {
  const RowMajor xs = f.X * f.S;
  const RowMajor y = f.Y;
  double num = 0.0, den = 0.0;
  for (const Entry& e : validation.entries()) {
    const double d = e.value - xs.row(e.row).dot(y.row(e.col));
    num += d * d;
    den += e.value * e.value;
  }
  if (!(den > 0.0)) {
    throw Error(ErrorKind::Numerical, "holdout values are all zero");
  }
  return num / den;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

// Singular values of frame^T estimate: cosines of the principal angles.
std::vector<double> overlap_singulars(const Eigen::MatrixXd& frame,
                                      const Eigen::MatrixXd& estimate) {
  return to_vector(
      Eigen::JacobiSVD<Eigen::MatrixXd>(frame.transpose() * estimate).singularValues());
}

/// One (data cell, replicate) work unit.
struct Unit {
  int cell = 0;
  int replicate = 0;
  Index m = 0, n = 0;
  int r_true = 0;
  double p = 1.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

std::uint64_t unit_seed(std::uint64_t base, std::initializer_list<std::size_t> coords) {
  std::uint64_t h = mix64(base);
  for (std::size_t c : coords) h = mix64(h ^ (static_cast<std::uint64_t>(c) + 0x632be59bd9b4e019ULL));
  return h;
}

std::vector<Unit> enumerate_units(const ExperimentConfig& config) {
  std::vector<int> ranks = config.r_true;
  if (!config.spectrum.empty()) ranks = {static_cast<int>(config.spectrum.size())};
  std::vector<Unit> units;
  int cell = 0;
  for (std::size_t im = 0; im < config.m.size(); ++im)
    for (std::size_t in = 0; in < config.n.size(); ++in)
      for (std::size_t ir = 0; ir < ranks.size(); ++ir)
        for (std::size_t ip = 0; ip < config.p.size(); ++ip)
          for (std::size_t iz = 0; iz < config.noise.size(); ++iz, ++cell)
            for (int rep = 0; rep < config.replicates; ++rep) {
              Unit u;
              u.cell = cell;
              u.replicate = rep;
              u.m = config.m[im];
              u.n = config.n[in];
              u.r_true = ranks[ir];
              u.p = config.p[ip];
              u.noise = config.noise[iz];
              u.seed = unit_seed(config.seed, {im, in, ir, ip, iz,
                                               static_cast<std::size_t>(rep)});
              units.push_back(u);
            }
  return units;
}

struct Cell {
  const ExperimentConfig& config;
  const Unit& unit;
  synth::SynthInstance inst;
  theory::TheoryPrediction theory;
  double sigma2 = 0.0;
  std::optional<double> snr;
  std::optional<double> noise_ratio;
};

double resolve_sigma2(const ExperimentConfig& config, const Unit& u) {
  switch (config.noise_axis) {
    case NoiseAxis::Sigma2:
      return u.noise;
    case NoiseAxis::Snr: {
      // Mean squared entry of M: r for the factor model, ||sigma||^2 spiked.
      double signal = u.r_true;
      if (!config.spectrum.empty()) {
        signal = 0.0;
        for (double s : config.spectrum) signal += s * s;
      }
      return signal / (u.noise * u.noise * std::sqrt(double(u.m) * double(u.n)));
    }
    case NoiseAxis::NoiseRatio:
      return u.noise * u.p * config.spectrum.front() * config.spectrum.front();
  }
  return u.noise;
}

ResultRow base_row(const Cell& c, int rank_used, const std::string& method) {
  ResultRow row;
  row.kind = to_string(c.config.kind);
  row.cell = c.unit.cell;
  row.replicate = c.unit.replicate;
  row.seed = c.unit.seed;
  row.m = c.unit.m;
  row.n = c.unit.n;
  row.r_true = c.unit.r_true;
  row.rank_used = rank_used;
  row.p = c.unit.p;
  row.sigma2 = c.sigma2;
  row.snr = c.snr;
  row.noise_ratio = c.noise_ratio;
  row.method = method;
  row.z_theory = c.theory.z;
  row.a_theory = c.theory.a;
  row.b_theory = c.theory.b;
  row.rel_mse_theory = c.theory.rel_mse;
  row.threshold_rank = c.theory.k;
  return row;
}

void measure(ResultRow& row, const Cell& c, const Eigen::MatrixXd& estimate) {
  const auto& obs = c.inst.observed;
  if (obs.size() < static_cast<std::size_t>(obs.rows() * obs.cols())) {
    row.test_error = synth::test_error(c.inst.truth, estimate, obs);
  }
  row.train_error = synth::train_error(obs, estimate);
  row.rel_fro_error = synth::rel_fro_error(c.inst.truth, estimate);
}

void record_factors(ResultRow& row, const Cell& c, const Factorization& f,
                    const SvdTriple& svd) {
  row.z_measured = to_vector(svd.singulars / double(c.unit.n));
  row.overlap_left = overlap_singulars(c.inst.left_frame, f.X);
  row.overlap_right = overlap_singulars(c.inst.right_frame, f.Y);
}

PipelineOptions pipeline_options(const ExperimentConfig& config, std::uint64_t seed,
                                 int rank) {
  PipelineOptions opts;
  opts.descent.max_iters = config.max_iters;
  opts.svd.tol = config.svd_tol;
  opts.svd.max_iters = config.svd_max_iters;
  opts.svd.seed = derive_seed(seed, 100 + static_cast<std::uint64_t>(rank));
  return opts;
}

template <typename Fn>
void guarded(std::vector<ResultRow>& out, ResultRow row, Fn&& fill) {
  const auto start = std::chrono::steady_clock::now();
  try {
    fill(row);
  } catch (const std::exception& e) {
    row.status = e.what();
    row.test_error.reset();
    row.train_error.reset();
    row.rel_fro_error.reset();
  }
  row.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.push_back(std::move(row));
}

void optspace_row(std::vector<ResultRow>& out, const Cell& c, int rank,
                  const std::string& method, double lambda) {
  guarded(out, base_row(c, rank, method), [&](ResultRow& row) {
    row.lambda = lambda;
    const auto res = run_optspace(c.inst.observed, rank, lambda, lambda,
                                  pipeline_options(c.config, c.unit.seed, rank));
    measure(row, c, reconstruct(res.factors));
    record_factors(row, c, res.factors, res.svd);
    if (!res.trace.records.empty()) {
      row.iterations = res.trace.records.back().iteration;
      row.termination = manifold::to_string(res.trace.reason);
    }
  });
}

void selected_row(std::vector<ResultRow>& out, const Cell& c, int rank) {
  guarded(out, base_row(c, rank, "optspace_lambda_star"), [&](ResultRow& row) {
    const auto grid = c.config.lambda.empty() ? default_lambda_grid(c.inst.params)
                                              : c.config.lambda;
    const auto opts = pipeline_options(c.config, c.unit.seed, rank);
    const auto sel = select_lambda(c.inst.observed, rank, grid, c.config.holdout_fraction,
                                   derive_seed(c.unit.seed, 200 + std::uint64_t(rank)), opts);
    row.lambda = sel.lambda_star;
    const auto res = run_optspace(c.inst.observed, rank, sel.lambda_star, sel.lambda_star, opts);
    measure(row, c, reconstruct(res.factors));
    record_factors(row, c, res.factors, res.svd);
    if (!res.trace.records.empty()) {
      row.iterations = res.trace.records.back().iteration;
      row.termination = manifold::to_string(res.trace.reason);
    }
  });
}

void soft_impute_rows(std::vector<ResultRow>& out, const Cell& c) {
  for (double lambda_nn : c.config.soft_impute_lambda) {
    guarded(out, base_row(c, 0, "soft_impute"), [&](ResultRow& row) {
      row.lambda = lambda_nn;
      SoftImputeOptions opts;
      opts.max_iters = std::max(1, c.config.max_iters);
      const auto res = soft_impute_baseline(c.inst.observed, lambda_nn, opts);
      row.rank_used = res.rank;
      row.iterations = res.iterations;
      row.termination = res.converged ? "converged" : "max_iterations";
      measure(row, c, res.completed);
    });
  }
}

void spectral_rows(std::vector<ResultRow>& out, const Cell& c, int rank, bool with_oracle) {
  SvdResult svd;
  std::string failure;
  try {
    auto opts = pipeline_options(c.config, c.unit.seed, rank);
    svd = truncated_svd(trim(c.inst.observed, opts.trim_factor), rank, opts.svd);
  } catch (const std::exception& e) {
    failure = e.what();
  }

  guarded(out, base_row(c, rank, "spectral_theory"), [&](ResultRow& row) {
    if (!failure.empty()) throw Error(ErrorKind::Numerical, failure);
    double t = 0.0;
    if (c.theory.k > 0) t = theory::theory_lambda(c.inst.params).t_star;
    row.shrink = t;
    row.lambda = t > 0.0 ? 1.0 / t - 1.0 : std::numeric_limits<double>::infinity();
    if (!std::isfinite(*row.lambda)) row.lambda.reset();
    const Factorization f = t > 0.0 ? spectral_estimate(svd.triple, Shrinkage::from_factor(t))
                                    : Factorization{svd.triple.left,
                                                    Eigen::MatrixXd::Zero(rank, rank),
                                                    svd.triple.right};
    measure(row, c, reconstruct(f));
    record_factors(row, c, f, svd.triple);
    row.iterations = svd.iterations;
    row.termination = svd.converged ? "svd_converged" : "svd_max_iterations";
  });
  if (!with_oracle) return;

  guarded(out, base_row(c, rank, "spectral_oracle"), [&](ResultRow& row) {
    if (!failure.empty()) throw Error(ErrorKind::Numerical, failure);
    const Eigen::MatrixXd unshrunk =
        reconstruct(spectral_estimate(svd.triple, Shrinkage::from_factor(1.0)));
    const double t = std::max(0.0, (c.inst.truth.array() * unshrunk.array()).sum() /
                                       unshrunk.squaredNorm());
    row.shrink = t;
    if (t > 0.0) row.lambda = 1.0 / t - 1.0;
    measure(row, c, t * unshrunk);
    record_factors(row, c, spectral_estimate(svd.triple, Shrinkage::from_factor(1.0)),
                   svd.triple);
    row.iterations = svd.iterations;
    row.termination = svd.converged ? "svd_converged" : "svd_max_iterations";
  });
}

std::vector<ResultRow> run_unit(const ExperimentConfig& config, const Unit& u) {
  std::vector<ResultRow> rows;
  Cell c{config, u, {}, {}, 0.0, std::nullopt, std::nullopt};
  try {
    c.sigma2 = resolve_sigma2(config, u);
    if (config.noise_axis == NoiseAxis::Snr) c.snr = u.noise;
    if (config.noise_axis == NoiseAxis::NoiseRatio) c.noise_ratio = u.noise;
    const auto mask = config.fixed_size_mask ? synth::MaskKind::FixedSize
                                             : synth::MaskKind::Bernoulli;
    if (config.spectrum.empty()) {
      c.inst = synth::generate({u.m, u.n, u.r_true, c.sigma2, u.p, u.seed, mask});
    } else {
      c.inst = synth::generate_spiked(u.m, u.n, config.spectrum, c.sigma2, u.p, u.seed, mask);
    }
    if (!c.noise_ratio && !c.inst.params.sigma.empty()) {
      const double s1 = c.inst.params.sigma.front();
      c.noise_ratio = c.sigma2 / (u.p * s1 * s1);
    }
    c.theory = theory::predict(c.inst.params);
  } catch (const std::exception& e) {
    ResultRow row = base_row(c, u.r_true, "generate");
    row.status = e.what();
    rows.push_back(std::move(row));
    return rows;
  }

  std::vector<int> ranks = config.rank_used;
  if (ranks.empty()) ranks = {u.r_true};
  for (std::size_t ir = 0; ir < ranks.size(); ++ir) {
    const int rank = ranks[ir];
    switch (config.kind) {
      case ExperimentKind::SweepRank:
        optspace_row(rows, c, rank, "optspace_0", 0.0);
        selected_row(rows, c, rank);
        break;
      case ExperimentKind::SweepLambda:
      case ExperimentKind::SingleRun:
        for (double lambda : config.lambda) optspace_row(rows, c, rank, "optspace", lambda);
        break;
      case ExperimentKind::SweepNoise:
        spectral_rows(rows, c, rank, true);
        break;
      case ExperimentKind::TheoryCheck:
        spectral_rows(rows, c, rank, false);
        break;
    }
    if (ir == 0) soft_impute_rows(rows, c);
  }
  return rows;
}

}  // namespace

namespace {

struct Prepared {
  SvdResult svd;
  std::size_t trimmed_entries = 0;
};

void check_rank(const ObservedMatrix& obs, int rank) {
  if (rank < 1 || rank > std::min(obs.rows(), obs.cols())) {
    throw Error(ErrorKind::InvalidArgument,
                "optspace: rank " + std::to_string(rank) + " outside [1, min(m, n)]");
  }
}

// Steps 1 and 2 up to the SVD, which does not depend on lambda.
Prepared prepare(const ObservedMatrix& obs, int rank, const PipelineOptions& options) {
  check_rank(obs, rank);
  Prepared out;
  const ObservedMatrix trimmed =
      with_stage("trim", [&] { return trim(obs, options.trim_factor); });
  out.trimmed_entries = obs.size() - trimmed.size();
  if (trimmed.empty()) {
    throw Error(ErrorKind::Numerical, "trim: every entry was removed");
  }
  out.svd = with_stage("spectral", [&] { return truncated_svd(trimmed, rank, options.svd); });
  return out;
}

OptSpaceResult finish(const ObservedMatrix& obs, const Prepared& prepared,
                      double lambda_spectral, double lambda_descent,
                      const PipelineOptions& options) {
  OptSpaceResult out;
  out.trimmed_entries = prepared.trimmed_entries;
  out.svd_converged = prepared.svd.converged;
  out.svd = prepared.svd.triple;
  out.spectral = with_stage("spectral", [&] {
    return spectral_estimate(out.svd, Shrinkage::from_lambda(lambda_spectral));
  });
  if (options.descent.max_iters == 0) {
    out.factors = out.spectral;
    return out;
  }
  with_stage("descent", [&] {
    manifold::DescentOptions descent = options.descent;
    descent.lambda = lambda_descent;
    auto res = manifold::descend(out.spectral, obs, descent);
    out.factors = std::move(res.factors);
    out.trace = std::move(res.trace);
    return 0;
  });
  return out;
}

}  // namespace

OptSpaceResult run_optspace(const ObservedMatrix& obs, int rank, double lambda_spectral,
                            double lambda_descent, const PipelineOptions& options) {
  return finish(obs, prepare(obs, rank, options), lambda_spectral, lambda_descent, options);
}

LambdaSelection select_lambda(const ObservedMatrix& obs, int rank,
                              const std::vector<double>& grid, double holdout_fraction,
                              std::uint64_t seed, const PipelineOptions& options) {
  if (grid.empty()) {
    throw Error(ErrorKind::InvalidArgument, "select_lambda: empty lambda grid");
  }
  const HoldoutSplit split = split_holdout(obs, holdout_fraction, seed);
  if (split.validation.empty()) {
    throw Error(ErrorKind::InvalidArgument,
                "select_lambda: holdout is empty (increase holdout_fraction)");
  }
  const Prepared prepared = prepare(split.train, rank, options);
  LambdaSelection out;
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double lambda : grid) {
    LambdaScore score;
    score.lambda = lambda;
    try {
      const auto res = finish(split.train, prepared, lambda, lambda, options);
      score.holdout_error = holdout_error(res.factors, split.validation);
      score.ok = std::isfinite(score.holdout_error);
      score.status = score.ok ? "ok" : "non-finite holdout error";
    } catch (const std::exception& e) {
      score.status = e.what();
    }
    if (score.ok && (score.holdout_error < best ||
                     (score.holdout_error == best && lambda < out.lambda_star))) {
      best = score.holdout_error;
      out.lambda_star = lambda;
      found = true;
    }
    out.table.push_back(std::move(score));
  }
  if (!found) {
    std::string why = out.table.front().status;
    throw Error(ErrorKind::Numerical, "select_lambda: every lambda failed (" + why + ")");
  }
  return out;
}

std::vector<double> default_lambda_grid(const theory::ModelParams& params) {
  double anchor = params.p;
  try {
    const double t = theory::theory_lambda(params).t_star;
    const double candidate = 1.0 / t - params.p;
    if (candidate > 0.0) anchor = candidate;
  } catch (const Error&) {
    // No mode above threshold: keep the fallback anchor.
  }
  return {0.0, 0.25 * anchor, 0.5 * anchor, anchor, 2.0 * anchor, 4.0 * anchor};
}

std::vector<ResultRow> run(const ExperimentConfig& config,
                           const std::function<void(const ResultRow&)>& on_row) {
  config.validate();
  const std::vector<Unit> units = enumerate_units(config);
  std::vector<std::vector<ResultRow>> results(units.size());
  std::vector<bool> done(units.size(), false);
  std::size_t flushed = 0;
  std::mutex lock;
  std::atomic<std::size_t> next{0};

  // Rows are released strictly in unit order, whatever order units finish in.
  auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      auto rows = run_unit(config, units[i]);
      std::lock_guard<std::mutex> guard(lock);
      results[i] = std::move(rows);
      done[i] = true;
      while (flushed < units.size() && done[flushed]) {
        if (on_row) {
          for (const auto& row : results[flushed]) on_row(row);
        }
        ++flushed;
      }
    }
  };
  const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(units.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ResultRow> rows;
  for (auto& chunk : results) {
    for (auto& row : chunk) rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> run_and_write(const ExperimentConfig& config) {
  const auto& path = config.output;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_csv_header(out);
  out.flush();
  auto rows = run(config, [&](const ResultRow& row) {
    write_csv_row(out, row);
    out.flush();
  });
  out.close();

  auto sibling = [&](const std::string& suffix) {
    auto p = path;
    p.replace_filename(path.stem().string() + suffix);
    return p;
  };
  const auto summary_path = sibling(".summary.csv");
  emit_summary(summarize(rows), summary_path);
  emit_timing(rows, sibling(".timing.csv"));
  emit_plotscript(rows, sibling(".gp"), summary_path.filename().string());
  return rows;
}

}  // namespace optspace::harness
