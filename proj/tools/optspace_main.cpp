// optspace command-line front end: synthetic data, completion, theory and sweeps.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "optspace/config.hpp"
#include "optspace/csv.hpp"
#include "optspace/error.hpp"
#include "optspace/harness.hpp"
#include "optspace/matrix_market.hpp"
#include "optspace/random.hpp"
#include "optspace/synth.hpp"
#include "optspace/theory.hpp"

namespace fs = std::filesystem;
using namespace optspace;

namespace {

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += io::format_double(v[i]);
  }
  return out;
}

std::uint64_t file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return io::fnv1a(buf.str());
}

struct SynthArgs {
  long long m = 0, n = 0;
  int r = 1;
  std::vector<double> spectrum;
  double sigma2 = 0.0;
  double snr = 0.0;
  double p = 1.0;
  std::uint64_t seed = 0;
  bool fixed_size = false;
  std::string out;
};

int run_synth(const SynthArgs& a, bool snr_given) {
  synth::SynthOptions opts;
  opts.m = a.m;
  opts.n = a.n;
  opts.r = a.spectrum.empty() ? a.r : static_cast<int>(a.spectrum.size());
  opts.p = a.p;
  opts.seed = a.seed;
  opts.mask = a.fixed_size ? synth::MaskKind::FixedSize : synth::MaskKind::Bernoulli;
  opts.sigma2 = a.sigma2;
  if (snr_given) {
    double signal = opts.r;
    if (!a.spectrum.empty()) {
      signal = 0.0;
      for (double s : a.spectrum) signal += s * s;
    }
    opts.sigma2 = signal / (a.snr * a.snr * std::sqrt(double(a.m) * double(a.n)));
  }
  const auto inst = a.spectrum.empty()
                        ? synth::generate(opts)
                        : synth::generate_spiked(a.m, a.n, a.spectrum, opts.sigma2, a.p,
                                                 a.seed, opts.mask);
  synth::save_instance(a.out, inst, opts);
  std::printf("wrote %s (|E| = %zu, sigma2 = %s)\n", a.out.c_str(), inst.observed.size(),
              io::format_double(opts.sigma2).c_str());
  return 0;
}

struct CompleteArgs {
  std::string input;
  int rank = 1;
  double lambda = 0.0;
  std::optional<double> lambda_spectral;
  std::optional<double> lambda_descent;
  int max_iters = 500;
  double svd_tol = 1e-10;
  int svd_max_iters = 1000;
  std::uint64_t seed = 0;
  std::string out;
  std::string trace;
  std::string truth;
};

int run_complete(const CompleteArgs& a) {
  const auto obs = io::load_coordinate(a.input);
  harness::PipelineOptions opts;
  opts.descent.max_iters = a.max_iters;
  opts.svd.tol = a.svd_tol;
  opts.svd.max_iters = a.svd_max_iters;
  opts.svd.seed = derive_seed(a.seed, Stream::SvdStart);
  const double ls = a.lambda_spectral.value_or(a.lambda);
  const double ld = a.lambda_descent.value_or(a.lambda);
  const auto res = harness::run_optspace(obs, a.rank, ls, ld, opts);

  const fs::path dir = a.out;
  fs::create_directories(dir);
  io::save_array(dir / "X.mtx", res.factors.X);
  io::save_array(dir / "S.mtx", res.factors.S);
  io::save_array(dir / "Y.mtx", res.factors.Y);

  io::KeyValues manifest;
  manifest["input"] = a.input;
  manifest["input_fnv1a"] = io::hex_digest(file_digest(a.input));
  manifest["rank"] = std::to_string(a.rank);
  manifest["lambda_spectral"] = io::format_double(ls);
  manifest["lambda_descent"] = io::format_double(ld);
  manifest["seed"] = std::to_string(a.seed);
  manifest["max_iters"] = std::to_string(a.max_iters);
  manifest["svd_converged"] = res.svd_converged ? "true" : "false";
  manifest["trimmed_entries"] = std::to_string(res.trimmed_entries);
  if (!res.trace.records.empty()) {
    manifest["iterations"] = std::to_string(res.trace.records.back().iteration);
    manifest["termination"] = manifold::to_string(res.trace.reason);
    manifest["final_cost"] = io::format_double(res.trace.records.back().cost);
  }
  const Eigen::MatrixXd estimate = reconstruct(res.factors);
  manifest["train_error"] = io::format_double(synth::train_error(obs, estimate));
  if (!a.truth.empty()) {
    const Eigen::MatrixXd truth = io::load_array(a.truth);
    if (truth.rows() != obs.rows() || truth.cols() != obs.cols()) {
      throw Error(ErrorKind::DimensionMismatch, "--truth shape differs from the input");
    }
    manifest["rel_fro_error"] = io::format_double(synth::rel_fro_error(truth, estimate));
    if (obs.size() < static_cast<std::size_t>(obs.rows() * obs.cols())) {
      manifest["test_error"] = io::format_double(synth::test_error(truth, estimate, obs));
    }
  }
  io::save_key_values(dir / "manifest.txt", manifest);

  if (!a.trace.empty()) {
    std::ofstream t(a.trace);
    if (!t) throw Error(ErrorKind::Io, "cannot write " + a.trace);
    t << "iteration,cost,grad_norm,step\n";
    for (const auto& rec : res.trace.records) {
      t << rec.iteration << ',' << io::format_double(rec.cost) << ','
        << io::format_double(rec.grad_norm) << ',' << io::format_double(rec.step) << '\n';
    }
  }
  for (const auto& [k, v] : manifest) std::printf("%s=%s\n", k.c_str(), v.c_str());
  return 0;
}

struct TheoryArgs {
  std::vector<double> sigma;
  double sigma2 = 0.0;
  double p = 1.0;
  double alpha = 1.0;
};

int run_theory(const TheoryArgs& a) {
  theory::ModelParams params;
  params.sigma = a.sigma;
  params.sigma2 = a.sigma2;
  params.p = a.p;
  params.alpha = a.alpha;
  const auto pred = theory::predict(params);
  std::optional<theory::ShrinkageChoice> choice;
  if (pred.k > 0) choice = theory::theory_lambda(params);

  std::printf("k=%d\n", pred.k);
  std::printf("z=%s\n", join(pred.z).c_str());
  std::printf("a=%s\n", join(pred.a).c_str());
  std::printf("b=%s\n", join(pred.b).c_str());
  std::printf("rel_mse=%s\n", io::format_double(pred.rel_mse).c_str());
  std::printf("bulk_edge=%s\n", io::format_double(pred.bulk_edge).c_str());
  if (choice) {
    std::printf("t_star=%s\n", io::format_double(choice->t_star).c_str());
    std::printf("lambda_star=%s\n", io::format_double(choice->lambda_star).c_str());
  }
  std::printf("\nsigma,sigma2,p,alpha,k,z,a,b,rel_mse,bulk_edge,t_star,lambda_star\n");
  std::printf("%s,%s,%s,%s,%d,%s,%s,%s,%s,%s,%s,%s\n", join(a.sigma).c_str(),
              io::format_double(a.sigma2).c_str(), io::format_double(a.p).c_str(),
              io::format_double(a.alpha).c_str(), pred.k, join(pred.z).c_str(),
              join(pred.a).c_str(), join(pred.b).c_str(),
              io::format_double(pred.rel_mse).c_str(),
              io::format_double(pred.bulk_edge).c_str(),
              choice ? io::format_double(choice->t_star).c_str() : "",
              choice ? io::format_double(choice->lambda_star).c_str() : "");
  return 0;
}

// Later settings replace every earlier line with the same key.
std::string merge_settings(const std::string& base, const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> lines;
  std::istringstream in(base);
  std::string line;
  while (std::getline(in, line)) {
    auto body = line.substr(0, line.find('#'));
    const auto eq = body.find('=');
    std::string key = eq == std::string::npos ? "" : body.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t\r") + 1);
    lines.emplace_back(key, line);
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config, "--set expects key=value, got '" + s + "'");
    }
    const std::string key = s.substr(0, eq);
    std::erase_if(lines, [&](const auto& l) { return l.first == key; });
  }
  std::string out;
  for (const auto& l : lines) out += l.second + '\n';
  for (const auto& s : sets) out += s + '\n';
  return out;
}

struct SweepArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::optional<int> threads;
};

int run_sweep(const SweepArgs& a) {
  std::string base;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + a.config);
    std::ostringstream buf;
    buf << in.rdbuf();
    base = buf.str();
  }
  auto sets = a.sets;
  if (a.seed) sets.push_back("seed=" + std::to_string(*a.seed));
  if (!a.output.empty()) sets.push_back("output=" + a.output);
  if (a.threads) sets.push_back("threads=" + std::to_string(*a.threads));
  std::istringstream merged(merge_settings(base, sets));
  const auto config = harness::parse_config(merged);
  const auto rows = harness::run_and_write(config);
  std::size_t failed = 0;
  for (const auto& row : rows) failed += row.status != "ok";
  std::printf("wrote %zu rows to %s (%zu failed)\n", rows.size(), config.output.c_str(),
              failed);
  return 0;
}

struct SelectArgs {
  std::string input;
  int rank = 1;
  std::vector<double> grid;
  double holdout = 0.2;
  std::uint64_t seed = 0;
  int max_iters = 500;
};

int run_select(const SelectArgs& a) {
  const auto obs = io::load_coordinate(a.input);
  harness::PipelineOptions opts;
  opts.descent.max_iters = a.max_iters;
  opts.svd.seed = derive_seed(a.seed, Stream::SvdStart);
  const auto sel = harness::select_lambda(obs, a.rank, a.grid, a.holdout,
                                          derive_seed(a.seed, Stream::Holdout), opts);
  std::printf("lambda,holdout_error,status\n");
  for (const auto& s : sel.table) {
    std::printf("%s,%s,%s\n", io::format_double(s.lambda).c_str(),
                s.ok ? io::format_double(s.holdout_error).c_str() : "", s.status.c_str());
  }
  std::printf("lambda_star=%s\n", io::format_double(sel.lambda_star).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank matrix completion on the Grassmann manifold"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic completion instance");
  synth_cmd->add_option("--m", sa.m, "Rows")->required();
  synth_cmd->add_option("--n", sa.n, "Columns")->required();
  synth_cmd->add_option("--r", sa.r, "Rank of the factor model");
  synth_cmd->add_option("--spectrum", sa.spectrum, "Normalized singular values (spiked model)")
      ->delimiter(',');
  auto* sigma2_opt = synth_cmd->add_option("--sigma2", sa.sigma2, "Noise scale");
  auto* snr_opt = synth_cmd->add_option("--snr", sa.snr, "Signal-to-noise ratio");
  sigma2_opt->excludes(snr_opt);
  synth_cmd->add_option("--p", sa.p, "Sampling probability");
  synth_cmd->add_option("--seed", sa.seed, "Base seed")->required();
  synth_cmd->add_flag("--fixed-size-mask", sa.fixed_size, "Reveal exactly round(p m n) entries");
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();

  CompleteArgs ca;
  auto* complete_cmd = app.add_subcommand("complete", "Run OptSpace on a MatrixMarket file");
  complete_cmd->add_option("--input", ca.input, "Coordinate .mtx file")->required();
  complete_cmd->add_option("--rank", ca.rank, "Rank used")->required();
  complete_cmd->add_option("--lambda", ca.lambda, "Regularization for both steps");
  complete_cmd->add_option("--lambda-spectral", ca.lambda_spectral, "Spectral-step lambda");
  complete_cmd->add_option("--lambda-descent", ca.lambda_descent, "Descent-step lambda");
  complete_cmd->add_option("--max-iters", ca.max_iters, "Descent iterations (0 = spectral only)");
  complete_cmd->add_option("--svd-tol", ca.svd_tol);
  complete_cmd->add_option("--svd-max-iters", ca.svd_max_iters);
  complete_cmd->add_option("--seed", ca.seed, "Seed of the SVD start")->required();
  complete_cmd->add_option("--out", ca.out, "Output directory for X.mtx, S.mtx, Y.mtx")
      ->required();
  complete_cmd->add_option("--trace", ca.trace, "Write the descent trace as CSV");
  complete_cmd->add_option("--truth", ca.truth, "Dense truth (.mtx array) for error reporting");

  TheoryArgs ta;
  auto* theory_cmd = app.add_subcommand("theory", "Print the large-system predictions");
  theory_cmd->add_option("--sigma", ta.sigma, "Normalized singular values")
      ->required()
      ->delimiter(',');
  theory_cmd->add_option("--sigma2", ta.sigma2, "Noise scale");
  theory_cmd->add_option("--p", ta.p, "Sampling probability");
  theory_cmd->add_option("--alpha", ta.alpha, "Aspect ratio m / n");

  SweepArgs wa;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment config");
  sweep_cmd->add_option("--config", wa.config, "key=value config file");
  sweep_cmd->add_option("--set", wa.sets, "Override a config key (key=value), repeatable");
  sweep_cmd->add_option("--seed", wa.seed, "Base seed");
  sweep_cmd->add_option("--output", wa.output, "Results CSV path");
  sweep_cmd->add_option("--threads", wa.threads, "Worker threads");

  SelectArgs la;
  auto* select_cmd = app.add_subcommand("select-lambda", "Choose lambda on a holdout split");
  select_cmd->add_option("--input", la.input, "Coordinate .mtx file")->required();
  select_cmd->add_option("--rank", la.rank, "Rank used")->required();
  select_cmd->add_option("--grid", la.grid, "Candidate lambdas")->required()->delimiter(',');
  select_cmd->add_option("--holdout", la.holdout, "Holdout fraction");
  select_cmd->add_option("--seed", la.seed, "Seed of the split and SVD start")->required();
  select_cmd->add_option("--max-iters", la.max_iters, "Descent iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::InvalidArgument);
  }

  try {
    if (*synth_cmd) return run_synth(sa, snr_opt->count() > 0);
    if (*complete_cmd) return run_complete(ca);
    if (*theory_cmd) return run_theory(ta);
    if (*sweep_cmd) return run_sweep(wa);
    if (*select_cmd) return run_select(la);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
