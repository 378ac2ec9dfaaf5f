#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "optspace/error.hpp"
#include "optspace/harness.hpp"
#include "optspace/synth.hpp"

using namespace optspace;
using namespace optspace::harness;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "optspace_harness_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

bool orthonormal(const Eigen::MatrixXd& a, double tol) {
  return (a.transpose() * a - Eigen::MatrixXd::Identity(a.cols(), a.cols())).norm() < tol;
}

}  // namespace

TEST(Config, ParsesGridsAndScalars) {
  const auto c = parse(
      "# rank sweep\n"
      "kind=sweep_rank\n"
      "m=100\nn=80\nr_true=4\n"
      "p=0.5\np=0.7\n"
      "snr=1, 2\n"
      "rank_used=1,2,3\n"
      "lambda=auto\n"
      "replicates=3\nseed=42\nthreads=2\n"
      "output=out.csv\n");
  EXPECT_EQ(c.kind, ExperimentKind::SweepRank);
  EXPECT_EQ(c.m, (std::vector<Index>{100}));
  EXPECT_EQ(c.p, (std::vector<double>{0.5, 0.7}));
  EXPECT_EQ(c.noise_axis, NoiseAxis::Snr);
  EXPECT_EQ(c.noise, (std::vector<double>{1, 2}));
  EXPECT_EQ(c.rank_used, (std::vector<int>{1, 2, 3}));
  EXPECT_TRUE(c.lambda_auto);
  EXPECT_EQ(c.replicates, 3);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.output, std::filesystem::path("out.csv"));
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, Errors) {
  auto kind_of = [](const std::string& text) {
    try {
      parse(text).validate();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Numerical;
  };
  const std::string base = "kind=single_run\nm=10\nn=10\nr_true=1\np=0.5\nsigma2=0\nlambda=0\n";
  EXPECT_EQ(kind_of(base + "seed=1\n"), ErrorKind::Numerical);  // valid
  EXPECT_EQ(kind_of(base), ErrorKind::Config);                  // no seed
  EXPECT_EQ(kind_of("seed=1\nm=10\n"), ErrorKind::Config);      // no kind
  EXPECT_EQ(kind_of(base + "seed=1\nbogus=3\n"), ErrorKind::Config);
  EXPECT_EQ(kind_of(base + "seed=1\nreplicates=0\n"), ErrorKind::Config);
  EXPECT_EQ(kind_of(base + "seed=1\nholdout_fraction=0.6\n"), ErrorKind::Config);
  EXPECT_EQ(kind_of(base + "seed=1\np=abc\n"), ErrorKind::Config);
  EXPECT_EQ(kind_of(base + "seed=1\nsnr=1\n"), ErrorKind::Config);  // two noise axes
  EXPECT_EQ(kind_of("kind=nonsense\nseed=1\n"), ErrorKind::Config);
}

TEST(Csv, EmptyRowsGiveHeaderOnly) {
  const auto path = scratch("empty.csv");
  emit_csv({}, path);
  std::ostringstream header;
  write_csv_header(header);
  EXPECT_EQ(slurp(path), header.str());
  std::istringstream in(slurp(path));
  EXPECT_TRUE(parse_csv(in).empty());
}

TEST(Csv, RoundTripKeepsFullPrecision) {
  ResultRow row;
  row.kind = "sweep_rank";
  row.cell = 3;
  row.replicate = 7;
  row.seed = 18446744073709551557ull;
  row.m = 100;
  row.n = 90;
  row.r_true = 4;
  row.rank_used = 5;
  row.p = 0.1 + 0.2;
  row.sigma2 = 1.0 / 3.0;
  row.snr = std::nextafter(1.0, 2.0);
  row.method = "optspace_lambda_star";
  row.lambda = 2.0 / 7.0;
  row.test_error = 1e-300;
  row.train_error = 0.123456789012345678;
  row.rel_fro_error = 5e-17;
  row.z_measured = {2.1213203435596424, 0.5};
  row.overlap_left = {std::sqrt(0.5)};
  row.z_theory = {3 / std::sqrt(2.0)};
  row.rel_mse_theory = 0.75;
  row.threshold_rank = 1;
  row.iterations = 12;
  row.termination = "gradient_tolerance";

  std::ostringstream out;
  write_csv_header(out);
  write_csv_row(out, row);
  std::istringstream in(out.str());
  const auto back = parse_csv(in);
  ASSERT_EQ(back.size(), 1u);
  const auto& r = back[0];
  EXPECT_EQ(r.kind, row.kind);
  EXPECT_EQ(r.cell, row.cell);
  EXPECT_EQ(r.replicate, row.replicate);
  EXPECT_EQ(r.seed, row.seed);
  EXPECT_EQ(r.p, row.p);
  EXPECT_EQ(r.sigma2, row.sigma2);
  EXPECT_EQ(r.snr, row.snr);
  EXPECT_FALSE(r.noise_ratio.has_value());
  EXPECT_EQ(r.lambda, row.lambda);
  EXPECT_FALSE(r.shrink.has_value());
  EXPECT_EQ(r.test_error, row.test_error);
  EXPECT_EQ(r.train_error, row.train_error);
  EXPECT_EQ(r.rel_fro_error, row.rel_fro_error);
  EXPECT_EQ(r.z_measured, row.z_measured);
  EXPECT_EQ(r.overlap_left, row.overlap_left);
  EXPECT_TRUE(r.overlap_right.empty());
  EXPECT_EQ(r.z_theory, row.z_theory);
  EXPECT_EQ(r.rel_mse_theory, row.rel_mse_theory);
  EXPECT_EQ(r.threshold_rank, row.threshold_rank);
  EXPECT_EQ(r.iterations, row.iterations);
  EXPECT_EQ(r.termination, row.termination);
  EXPECT_EQ(r.status, "ok");
}

TEST(Csv, ColumnOrderMatchesHeader) {
  std::ostringstream header;
  write_csv_header(header);
  std::string joined;
  for (const auto& c : csv_columns()) joined += (joined.empty() ? "" : ",") + c;
  EXPECT_EQ(header.str(), joined + "\n");
  EXPECT_EQ(csv_columns().front(), "kind");
  EXPECT_EQ(csv_columns().back(), "status");
}

TEST(RunOptSpace, NoiselessRecovery) {
  const auto inst = synth::generate({400, 400, 3, 0.0, 0.3, 5});
  const auto res = run_optspace(inst.observed, 3, 0.0, 0.0);
  EXPECT_LT(synth::rel_fro_error(inst.truth, reconstruct(res.factors)), 1e-3);
  EXPECT_TRUE(orthonormal(res.factors.X, 1e-8));
  EXPECT_TRUE(orthonormal(res.factors.Y, 1e-8));
}

TEST(RunOptSpace, ZeroIterationsIsSpectralEstimate) {
  const auto inst = synth::generate({60, 50, 2, 0.3, 0.5, 6});
  PipelineOptions opts;
  opts.descent.max_iters = 0;
  const auto res = run_optspace(inst.observed, 2, 0.5, 0.5, opts);
  const auto direct =
      spectral_estimate(trim(inst.observed), 2, Shrinkage::from_lambda(0.5), opts.svd);
  EXPECT_EQ(res.factors.X, res.spectral.X);
  EXPECT_EQ(res.factors.S, res.spectral.S);
  EXPECT_LT((reconstruct(res.factors) - reconstruct(direct)).norm(), 1e-10);
}

TEST(RunOptSpace, FramesOrthonormalAcrossSettings) {
  for (double lambda : {0.0, 0.5, 5.0}) {
    const auto inst = synth::generate({80, 60, 3, 0.5, 0.4, 7});
    const auto res = run_optspace(inst.observed, 5, lambda, lambda);
    EXPECT_TRUE(orthonormal(res.factors.X, 1e-8));
    EXPECT_TRUE(orthonormal(res.factors.Y, 1e-8));
  }
}

TEST(RunOptSpace, ErrorsNameTheStage) {
  const auto inst = synth::generate({20, 20, 2, 0.0, 0.5, 8});
  try {
    run_optspace(inst.observed, 25, 0.0, 0.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
  EXPECT_THROW(run_optspace(inst.observed, 2, 0.0, -1.0), Error);
}

TEST(RunOptSpace, TrainErrorNonincreasingInRank) {
  const auto inst = synth::generate({100, 100, 4, 0.05, 0.5, 9});
  double prev = std::numeric_limits<double>::infinity();
  for (int rank = 1; rank <= 8; ++rank) {
    const auto res = run_optspace(inst.observed, rank, 0.0, 0.0);
    const double train = synth::train_error(inst.observed, reconstruct(res.factors));
    EXPECT_LE(train, prev + 1e-6) << "rank " << rank;
    prev = train;
  }
}

TEST(SelectLambda, SingleValueGrid) {
  const auto inst = synth::generate({50, 40, 2, 0.2, 0.5, 10});
  const auto sel = select_lambda(inst.observed, 2, {0.7}, 0.2, 11);
  EXPECT_EQ(sel.lambda_star, 0.7);
  ASSERT_EQ(sel.table.size(), 1u);
  EXPECT_TRUE(sel.table[0].ok);
}

TEST(SelectLambda, NoiselessPrefersTheoryValue) {
  // Noiseless at p = 0.5: the theory anchor in descent units is 0.
  const auto inst = synth::generate({200, 200, 3, 0.0, 0.5, 12});
  const auto grid = default_lambda_grid(inst.params);
  EXPECT_EQ(grid.front(), 0.0);
  const auto sel = select_lambda(inst.observed, 3, {0.0, 10.0}, 0.2, 13);
  EXPECT_EQ(sel.lambda_star, 0.0);
  EXPECT_LT(sel.table[0].holdout_error, sel.table[1].holdout_error);
}

TEST(SelectLambda, TableShapeAndTies) {
  const auto inst = synth::generate({60, 60, 2, 0.3, 0.5, 14});
  const std::vector<double> grid{0.0, 0.1, 1.0, 10.0, 10.0};
  const auto sel = select_lambda(inst.observed, 2, grid, 0.25, 15);
  ASSERT_EQ(sel.table.size(), grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_EQ(sel.table[k].lambda, grid[k]);
    EXPECT_TRUE(std::isfinite(sel.table[k].holdout_error));
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : sel.table) best = std::min(best, s.holdout_error);
  for (const auto& s : sel.table) {
    if (s.holdout_error == best) {
      EXPECT_EQ(sel.lambda_star, s.lambda);
      break;
    }
  }
  EXPECT_THROW(select_lambda(inst.observed, 2, {}, 0.2, 1), Error);
  EXPECT_THROW(select_lambda(inst.observed, 2, {0.0}, 0.0, 1), Error);
}

TEST(DefaultLambdaGrid, BracketsTheAnchor) {
  theory::ModelParams prm;
  prm.sigma = {std::sqrt(2.0)};
  prm.sigma2 = 1.0;
  const auto grid = default_lambda_grid(prm);
  // t* = 1/3 at p = 1 gives anchor 2.
  const std::vector<double> expected{0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
  ASSERT_EQ(grid.size(), expected.size());
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(grid[k], expected[k], 1e-12);
  prm.sigma2 = 5.0;  // below threshold: fallback anchor p
  EXPECT_EQ(default_lambda_grid(prm), (std::vector<double>{0.0, 0.25, 0.5, 1.0, 2.0, 4.0}));
}

TEST(Run, SingleRunNoiselessFullMask) {
  const auto rows = run(parse(
      "kind=single_run\nm=40\nn=30\nr_true=2\np=1\nsigma2=0\nlambda=0\nreplicates=1\nseed=3\n"));
  ASSERT_EQ(rows.size(), 1u);
  const auto& r = rows[0];
  EXPECT_EQ(r.status, "ok");
  EXPECT_NEAR(*r.train_error, 0.0, 1e-8);
  EXPECT_NEAR(*r.rel_fro_error, 0.0, 1e-8);
  // Nothing is held out of a full mask, so there is no test error to report.
  EXPECT_FALSE(r.test_error.has_value());
}

TEST(Run, TheoryCheckMatchesPrediction) {
  const auto rows = run(parse(
      "kind=theory_check\nm=1000\nn=1000\nspectrum=1.4142135623730951\np=1\nsigma2=1\n"
      "replicates=1\nseed=4\n"));
  ASSERT_EQ(rows.size(), 1u);
  const auto& r = rows[0];
  ASSERT_EQ(r.z_measured.size(), 1u);
  EXPECT_LT(std::abs(r.z_measured[0] - r.z_theory[0]) / r.z_theory[0], 0.03);
}

TEST(Run, RowsComeInGridOrderAndStreamInOrder) {
  const auto config = parse(
      "kind=sweep_rank\nm=40\nn=40\nr_true=2\np=0.5\nsnr=2\nrank_used=1,2,3\nlambda=0,1\n"
      "replicates=2\nseed=5\nthreads=3\n");
  std::vector<ResultRow> streamed;
  const auto rows = run(config, [&](const ResultRow& r) { streamed.push_back(r); });
  ASSERT_EQ(rows.size(), streamed.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].seed, streamed[k].seed);
    EXPECT_EQ(rows[k].method, streamed[k].method);
  }
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto key = [](const ResultRow& r) { return std::tuple(r.cell, r.replicate); };
    EXPECT_LE(key(rows[k - 1]), key(rows[k]));
  }
}

TEST(Run, ByteIdenticalAcrossRerunsAndThreadCounts) {
  const std::string text =
      "kind=sweep_rank\nm=50\nn=50\nr_true=3\np=0.5\nsnr=1\nrank_used=2,3,4\nlambda=auto\n"
      "soft_impute_lambda=5\nreplicates=2\nseed=6\n";
  auto config = parse(text);
  config.output = scratch("det_a.csv");
  run_and_write(config);
  config.output = scratch("det_b.csv");
  run_and_write(config);
  config.output = scratch("det_c.csv");
  config.threads = 3;
  run_and_write(config);
  const auto a = slurp(scratch("det_a.csv"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(scratch("det_b.csv")));
  EXPECT_EQ(a, slurp(scratch("det_c.csv")));
  EXPECT_EQ(slurp(scratch("det_a.summary.csv")), slurp(scratch("det_c.summary.csv")));
  EXPECT_TRUE(std::filesystem::exists(scratch("det_a.timing.csv")));
  EXPECT_TRUE(std::filesystem::exists(scratch("det_a.gp")));
}

TEST(Run, DifferentSeedsDiffer) {
  auto a = run(parse("kind=single_run\nm=30\nn=30\nr_true=2\np=0.5\nsigma2=0.1\nlambda=0\n"
                     "replicates=1\nseed=1\n"));
  auto b = run(parse("kind=single_run\nm=30\nn=30\nr_true=2\np=0.5\nsigma2=0.1\nlambda=0\n"
                     "replicates=1\nseed=2\n"));
  EXPECT_NE(a[0].seed, b[0].seed);
  EXPECT_NE(a[0].test_error, b[0].test_error);
}
