#include "optspace/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "optspace/error.hpp"

namespace optspace::harness {

namespace {

std::string trim_ws(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim_ws(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw Error(ErrorKind::Config, "config: bad value '" + text + "' for " + key);
  }
  return value;
}

template <typename T>
void append(std::vector<T>& axis, const std::string& key, const std::string& value) {
  for (const auto& item : split_list(value)) axis.push_back(parse_number<T>(key, item));
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorKind::Config, "config: bad boolean '" + value + "' for " + key);
}

ExperimentKind parse_kind(const std::string& value) {
  if (value == "sweep_rank") return ExperimentKind::SweepRank;
  if (value == "sweep_noise") return ExperimentKind::SweepNoise;
  if (value == "sweep_lambda") return ExperimentKind::SweepLambda;
  if (value == "theory_check") return ExperimentKind::TheoryCheck;
  if (value == "single_run") return ExperimentKind::SingleRun;
  throw Error(ErrorKind::Config, "config: unknown kind '" + value + "'");
}

void set_noise_axis(ExperimentConfig& config, NoiseAxis axis, const std::string& key,
                    const std::string& value) {
  if (!config.noise.empty() && config.noise_axis != axis) {
    throw Error(ErrorKind::Config,
                "config: only one of sigma2, snr, noise_ratio may be given");
  }
  config.noise_axis = axis;
  append(config.noise, key, value);
}

}  // namespace

const char* to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::SweepRank: return "sweep_rank";
    case ExperimentKind::SweepNoise: return "sweep_noise";
    case ExperimentKind::SweepLambda: return "sweep_lambda";
    case ExperimentKind::TheoryCheck: return "theory_check";
    case ExperimentKind::SingleRun: return "single_run";
  }
  return "unknown";
}

void apply_setting(ExperimentConfig& config, const std::string& key,
                   const std::string& value) {
  if (key == "kind") config.kind = parse_kind(value);
  else if (key == "m") append(config.m, key, value);
  else if (key == "n") append(config.n, key, value);
  else if (key == "r_true") append(config.r_true, key, value);
  else if (key == "spectrum") append(config.spectrum, key, value);
  else if (key == "rank_used") append(config.rank_used, key, value);
  else if (key == "p") append(config.p, key, value);
  else if (key == "sigma2") set_noise_axis(config, NoiseAxis::Sigma2, key, value);
  else if (key == "snr") set_noise_axis(config, NoiseAxis::Snr, key, value);
  else if (key == "noise_ratio") set_noise_axis(config, NoiseAxis::NoiseRatio, key, value);
  else if (key == "lambda") {
    for (const auto& item : split_list(value)) {
      if (item == "auto") config.lambda_auto = true;
      else config.lambda.push_back(parse_number<double>(key, item));
    }
  }
  else if (key == "soft_impute_lambda") append(config.soft_impute_lambda, key, value);
  else if (key == "replicates") config.replicates = parse_number<int>(key, value);
  else if (key == "seed") config.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "holdout_fraction") config.holdout_fraction = parse_number<double>(key, value);
  else if (key == "fixed_size_mask") config.fixed_size_mask = parse_bool(key, value);
  else if (key == "max_iters") config.max_iters = parse_number<int>(key, value);
  else if (key == "svd_tol") config.svd_tol = parse_number<double>(key, value);
  else if (key == "svd_max_iters") config.svd_max_iters = parse_number<int>(key, value);
  else if (key == "threads") config.threads = parse_number<int>(key, value);
  else if (key == "output") config.output = value;
  else throw Error(ErrorKind::Config, "config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  bool has_kind = false, has_seed = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim_ws(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config,
                  "config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim_ws(line.substr(0, eq));
    const std::string value = trim_ws(line.substr(eq + 1));
    has_kind |= key == "kind";
    has_seed |= key == "seed";
    apply_setting(config, key, value);
  }
  if (!has_kind) throw Error(ErrorKind::Config, "config: missing kind");
  if (!has_seed) throw Error(ErrorKind::Config, "config: missing seed");
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  return parse_config(in);
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, "config: " + msg); };
  if (m.empty() || n.empty()) fail("m and n are required");
  for (Index v : m) if (v < 1) fail("m must be >= 1");
  for (Index v : n) if (v < 1) fail("n must be >= 1");
  if (spectrum.empty() && r_true.empty()) fail("r_true or spectrum is required");
  for (int r : r_true) if (r < 1) fail("r_true must be >= 1");
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (!(spectrum[i] > 0.0)) fail("spectrum values must be positive");
    if (i > 0 && spectrum[i] > spectrum[i - 1]) fail("spectrum must be nonincreasing");
  }
  for (int r : rank_used) if (r < 1) fail("rank_used must be >= 1");
  if (p.empty()) fail("p is required");
  for (double v : p) if (!(v > 0.0 && v <= 1.0)) fail("p must lie in (0, 1]");
  if (noise.empty()) fail("one of sigma2, snr, noise_ratio is required");
  for (double v : noise) {
    if (noise_axis == NoiseAxis::Snr ? !(v > 0.0) : !(v >= 0.0)) {
      fail("noise level out of range");
    }
  }
  if (noise_axis == NoiseAxis::NoiseRatio && spectrum.empty()) {
    fail("noise_ratio requires an explicit spectrum");
  }
  for (double v : lambda) if (!(v >= 0.0)) fail("lambda values must be >= 0");
  for (double v : soft_impute_lambda) if (!(v >= 0.0)) fail("soft_impute_lambda must be >= 0");
  if (replicates < 1) fail("replicates must be >= 1");
  if (!(holdout_fraction >= 0.0 && holdout_fraction <= 0.5)) {
    fail("holdout_fraction must lie in [0, 0.5]");
  }
  if (kind == ExperimentKind::SweepRank && !(holdout_fraction > 0.0)) {
    fail("sweep_rank selects lambda on a holdout; holdout_fraction must be > 0");
  }
  if ((kind == ExperimentKind::SweepLambda || kind == ExperimentKind::SingleRun) &&
      lambda.empty()) {
    fail("explicit lambda values are required for this kind");
  }
  if (max_iters < 0) fail("max_iters must be >= 0");
  if (!(svd_tol > 0.0)) fail("svd_tol must be > 0");
  if (svd_max_iters < 1) fail("svd_max_iters must be >= 1");
  if (threads < 1) fail("threads must be >= 1");
}

}  // namespace optspace::harness
