#include "optspace/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "optspace/error.hpp"

namespace optspace::harness {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }
std::string opt(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }

std::string list(const std::vector<double>& values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ';';
    out += num(v);
  }
  return out;
}

std::string clean(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return text;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse(const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Parse, "csv: bad number '" + text + "'");
  }
  return value;
}

std::optional<double> parse_opt(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return parse<double>(text);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (const auto& item : split(text, ';')) out.push_back(parse<double>(item));
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

struct Moments {
  int count = 0;
  double sum = 0.0, sum_sq = 0.0;
  void add(double v) {
    ++count;
    sum += v;
    sum_sq += v * v;
  }
  double mean() const { return count ? sum / count : 0.0; }
  double stderr_of_mean() const {
    if (count < 2) return 0.0;
    const double var = std::max(0.0, (sum_sq - sum * sum / count) / (count - 1));
    return std::sqrt(var / count);
  }
};

}  // namespace

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> columns = {
      "kind",          "cell",          "replicate",      "seed",
      "m",             "n",             "r_true",         "rank_used",
      "p",             "sigma2",        "snr",            "noise_ratio",
      "method",        "lambda",        "shrink",         "test_error",
      "train_error",   "rel_fro_error", "z_measured",     "overlap_left",
      "overlap_right", "z_theory",      "a_theory",       "b_theory",
      "rel_mse_theory", "threshold_rank", "iterations",   "termination",
      "status"};
  return columns;
}

void write_csv_header(std::ostream& out) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

void write_csv_row(std::ostream& out, const ResultRow& r) {
  out << clean(r.kind) << ',' << r.cell << ',' << r.replicate << ',' << r.seed << ','
      << r.m << ',' << r.n << ',' << r.r_true << ',' << r.rank_used << ','
      << num(r.p) << ',' << num(r.sigma2) << ',' << opt(r.snr) << ','
      << opt(r.noise_ratio) << ',' << clean(r.method) << ',' << opt(r.lambda) << ','
      << opt(r.shrink) << ',' << opt(r.test_error) << ',' << opt(r.train_error) << ','
      << opt(r.rel_fro_error) << ',' << list(r.z_measured) << ','
      << list(r.overlap_left) << ',' << list(r.overlap_right) << ','
      << list(r.z_theory) << ',' << list(r.a_theory) << ',' << list(r.b_theory) << ','
      << opt(r.rel_mse_theory) << ',' << opt(r.threshold_rank) << ','
      << opt(r.iterations) << ',' << clean(r.termination) << ',' << clean(r.status)
      << '\n';
}

void emit_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_csv_header(out);
  for (const auto& row : rows) write_csv_row(out, row);
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::vector<ResultRow> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "csv: missing header");
  const auto header = split(line, ',');
  if (header != csv_columns()) throw Error(ErrorKind::Parse, "csv: unexpected header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) {
      throw Error(ErrorKind::Parse, "csv: wrong field count in '" + line + "'");
    }
    ResultRow r;
    r.kind = f[0];
    r.cell = parse<int>(f[1]);
    r.replicate = parse<int>(f[2]);
    r.seed = parse<std::uint64_t>(f[3]);
    r.m = parse<long long>(f[4]);
    r.n = parse<long long>(f[5]);
    r.r_true = parse<int>(f[6]);
    r.rank_used = parse<int>(f[7]);
    r.p = parse<double>(f[8]);
    r.sigma2 = parse<double>(f[9]);
    r.snr = parse_opt(f[10]);
    r.noise_ratio = parse_opt(f[11]);
    r.method = f[12];
    r.lambda = parse_opt(f[13]);
    r.shrink = parse_opt(f[14]);
    r.test_error = parse_opt(f[15]);
    r.train_error = parse_opt(f[16]);
    r.rel_fro_error = parse_opt(f[17]);
    r.z_measured = parse_list(f[18]);
    r.overlap_left = parse_list(f[19]);
    r.overlap_right = parse_list(f[20]);
    r.z_theory = parse_list(f[21]);
    r.a_theory = parse_list(f[22]);
    r.b_theory = parse_list(f[23]);
    r.rel_mse_theory = parse_opt(f[24]);
    if (!f[25].empty()) r.threshold_rank = parse<int>(f[25]);
    if (!f[26].empty()) r.iterations = parse<int>(f[26]);
    r.termination = f[27];
    r.status = f[28];
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_timing(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "cell,replicate,rank_used,method,wall_time_s\n";
  for (const auto& r : rows) {
    out << r.cell << ',' << r.replicate << ',' << r.rank_used << ',' << clean(r.method)
        << ',' << num(r.wall_time_s) << '\n';
  }
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  // Group key: cell, rank (soft-impute rows report their achieved rank, so
  // they are grouped by lambda alone), method, fixed lambda.
  using Key = std::tuple<int, int, std::string, double>;
  struct Group {
    SummaryRow head;
    Moments lambda, test, train, rel, theory;
  };
  std::map<Key, std::size_t> index;
  std::vector<Group> groups;
  for (const auto& r : rows) {
    const bool soft = r.method == "soft_impute";
    const bool fixed_lambda = r.method == "optspace" || r.method == "optspace_0" || soft;
    const Key key{r.cell, soft ? -1 : r.rank_used, r.method,
                  fixed_lambda && r.lambda ? *r.lambda : NAN};
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) {
      Group g;
      g.head.kind = r.kind;
      g.head.cell = r.cell;
      g.head.m = r.m;
      g.head.n = r.n;
      g.head.r_true = r.r_true;
      g.head.rank_used = r.rank_used;
      g.head.p = r.p;
      g.head.sigma2 = r.sigma2;
      g.head.noise_ratio = r.noise_ratio;
      g.head.method = r.method;
      if (fixed_lambda) g.head.lambda = r.lambda;
      groups.push_back(std::move(g));
    }
    Group& g = groups[it->second];
    ++g.head.replicates;
    if (r.status != "ok") {
      ++g.head.failures;
      continue;
    }
    if (soft && r.rank_used > g.head.rank_used) g.head.rank_used = r.rank_used;
    if (r.lambda) g.lambda.add(*r.lambda);
    if (r.test_error) g.test.add(*r.test_error);
    if (r.train_error) g.train.add(*r.train_error);
    if (r.rel_fro_error) g.rel.add(*r.rel_fro_error);
    if (r.rel_mse_theory) g.theory.add(*r.rel_mse_theory);
  }
  std::vector<SummaryRow> out;
  out.reserve(groups.size());
  for (auto& g : groups) {
    SummaryRow s = g.head;
    s.lambda_mean = g.lambda.mean();
    s.has_test = g.test.count > 0;
    s.has_train = g.train.count > 0;
    s.has_rel_fro = g.rel.count > 0;
    s.test_error_mean = g.test.mean();
    s.test_error_se = g.test.stderr_of_mean();
    s.train_error_mean = g.train.mean();
    s.train_error_se = g.train.stderr_of_mean();
    s.rel_fro_error_mean = g.rel.mean();
    s.rel_fro_error_se = g.rel.stderr_of_mean();
    if (g.theory.count) s.rel_mse_theory_mean = g.theory.mean();
    out.push_back(std::move(s));
  }
  return out;
}

void emit_summary(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "kind,cell,m,n,r_true,rank_used,p,sigma2,noise_ratio,method,lambda,replicates,"
         "failures,lambda_mean,test_error_mean,test_error_se,train_error_mean,"
         "train_error_se,rel_fro_error_mean,rel_fro_error_se,rel_mse_theory\n";
  auto maybe = [](bool has, double v) { return has ? num(v) : std::string(); };
  for (const auto& s : rows) {
    out << s.kind << ',' << s.cell << ',' << s.m << ',' << s.n << ',' << s.r_true << ','
        << s.rank_used << ',' << num(s.p) << ',' << num(s.sigma2) << ','
        << opt(s.noise_ratio) << ',' << s.method << ',' << opt(s.lambda) << ','
        << s.replicates << ',' << s.failures << ',' << num(s.lambda_mean) << ','
        << maybe(s.has_test, s.test_error_mean) << ','
        << maybe(s.has_test, s.test_error_se) << ','
        << maybe(s.has_train, s.train_error_mean) << ','
        << maybe(s.has_train, s.train_error_se) << ','
        << maybe(s.has_rel_fro, s.rel_fro_error_mean) << ','
        << maybe(s.has_rel_fro, s.rel_fro_error_se) << ','
        << opt(s.rel_mse_theory_mean) << '\n';
  }
}

void emit_plotscript(const std::vector<ResultRow>& rows, const std::filesystem::path& path,
                     const std::string& summary_csv_name) {
  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  const std::string kind = rows.empty() ? std::string("sweep_rank") : rows.front().kind;

  auto out = open_out(path);
  out << "# gnuplot script; run from this directory: gnuplot " << path.filename().string()
      << "\n"
      << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set terminal pngcairo size 900,1100\n"
      << "set output '" << path.stem().string() << ".png'\n"
      << "data = '" << summary_csv_name << "'\n";

  auto plot_panel = [&](const std::string& xcol, const std::string& ycol,
                        const std::string& ylabel, const std::string& xlabel) {
    out << "set xlabel '" << xlabel << "'\nset ylabel '" << ylabel << "'\nplot ";
    for (std::size_t i = 0; i < methods.size(); ++i) {
      out << (i ? ", \\\n     " : "") << "data using (strcol('method') eq '" << methods[i]
          << "' ? column('" << xcol << "') : NaN):(column('" << ycol << "_mean')):(column('"
          << ycol << "_se')) with yerrorlines title '" << methods[i] << "'";
    }
    out << '\n';
  };

  out << "set multiplot layout 2,1\n";
  if (kind == "sweep_noise" || kind == "theory_check") {
    plot_panel("noise_ratio", "rel_fro_error", "relative MSE", "sigma^2 / (p Sigma_1^2)");
    out << "set xlabel 'sigma^2 / (p Sigma_1^2)'\nset ylabel 'predicted relative MSE'\n"
        << "plot data using (column('noise_ratio')):(column('rel_mse_theory')) "
           "with linespoints title 'theory'\n";
  } else if (kind == "sweep_lambda") {
    plot_panel("lambda", "test_error", "test error", "lambda");
    plot_panel("lambda", "train_error", "train error", "lambda");
  } else {
    plot_panel("rank_used", "test_error", "test error", "rank");
    plot_panel("rank_used", "train_error", "train error", "rank");
  }
  out << "unset multiplot\n";
}

}  // namespace optspace::harness
