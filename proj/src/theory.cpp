#include "optspace/theory.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "optspace/error.hpp"

namespace optspace::theory {

namespace {

// Noise-to-signal ratio sigma2 / (p sigma_i^2) of one mode.
double noise_ratio(const ModelParams& params, double sigma_i) {
  return params.sigma2 / (params.p * sigma_i * sigma_i);
}

bool above_threshold(const ModelParams& params, double sigma_i) {
  return sigma_i * sigma_i > params.sigma2 / params.p;
}

}  // namespace

void ModelParams::validate() const {
  if (sigma.empty()) {
    throw Error(ErrorKind::InvalidArgument, "model: rank must be at least 1");
  }
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i])) {
      throw Error(ErrorKind::InvalidArgument,
                  "model: sigma values must be positive and finite");
    }
    if (i > 0 && sigma[i] > sigma[i - 1]) {
      throw Error(ErrorKind::InvalidArgument,
                  "model: sigma values must be nonincreasing");
    }
  }
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
    throw Error(ErrorKind::InvalidArgument, "model: sigma2 must be >= 0");
  }
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "model: p must lie in (0, 1]");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::InvalidArgument, "model: alpha must be positive");
  }
}

int threshold_rank(const ModelParams& params) {
  params.validate();
  int k = 0;
  while (k < params.rank() && above_threshold(params, params.sigma[k])) ++k;
  return k;
}

double bulk_edge(const ModelParams& params) {
  params.validate();
  const double sa = std::sqrt(params.alpha);
  return std::sqrt(params.sigma2) * std::sqrt(params.p * sa) * (1.0 + sa);
}

std::vector<double> predict_singular_values(const ModelParams& params) {
  const double edge = bulk_edge(params);
  const double sa = std::sqrt(params.alpha);
  std::vector<double> z;
  z.reserve(params.sigma.size());
  for (double s : params.sigma) {
    if (!above_threshold(params, s)) {
      z.push_back(edge);
      continue;
    }
    const double x = noise_ratio(params, s);
    z.push_back(params.p * s *
                std::sqrt(params.alpha * (x + 1.0 / sa) * (x + sa)));
  }
  return z;
}

Overlaps predict_overlaps(const ModelParams& params) {
  params.validate();
  const double sa = std::sqrt(params.alpha);
  Overlaps out;
  for (double s : params.sigma) {
    if (!above_threshold(params, s)) {
      out.a.push_back(0.0);
      out.b.push_back(0.0);
      continue;
    }
    const double x = noise_ratio(params, s);
    const double gain = 1.0 - x * x;
    out.a.push_back(std::sqrt(gain / (1.0 + sa * x)));
    out.b.push_back(std::sqrt(gain / (1.0 + x / sa)));
  }
  return out;
}

double predict_rel_mse(const ModelParams& params) {
  params.validate();
  const double sa = std::sqrt(params.alpha);
  double captured = 0.0;  // sum sigma_k^2 (1 - x_k^2)_+
  double spread = 0.0;    // sum sigma_k^2 (1 + sqrt(a) x_k)(1 + x_k / sqrt(a))
  double energy = 0.0;    // ||sigma||^2
  for (double s : params.sigma) {
    const double s2 = s * s;
    const double x = noise_ratio(params, s);
    captured += s2 * std::max(0.0, 1.0 - x * x);
    spread += s2 * (1.0 + sa * x) * (1.0 + x / sa);
    energy += s2;
  }
  if (captured == 0.0) return 1.0;
  return 1.0 - captured * captured / (energy * spread);
}

double mp_density(double lambda, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::InvalidArgument, "mp_density: alpha must be positive");
  }
  const double c_minus = 1.0 - 1.0 / std::sqrt(alpha);
  const double c_plus = 1.0 + 1.0 / std::sqrt(alpha);
  const double lo = c_minus * c_minus;
  const double hi = c_plus * c_plus;
  if (!(lambda > lo && lambda < hi) || lambda <= 0.0) return 0.0;
  return alpha * std::sqrt((lambda - lo) * (hi - lambda)) /
         (2.0 * std::numbers::pi * lambda);
}

TheoryPrediction predict(const ModelParams& params) {
  TheoryPrediction out;
  out.k = threshold_rank(params);
  out.z = predict_singular_values(params);
  auto overlaps = predict_overlaps(params);
  out.a = std::move(overlaps.a);
  out.b = std::move(overlaps.b);
  out.rel_mse = predict_rel_mse(params);
  out.bulk_edge = bulk_edge(params);
  return out;
}

ShrinkageChoice theory_lambda(const ModelParams& params) {
  const int k = threshold_rank(params);
  if (k == 0) {
    throw Error(ErrorKind::Numerical,
                "theory_lambda: no mode above the noise threshold "
                "(observations carry no usable signal)");
  }
  const auto z = predict_singular_values(params);
  const auto [a, b] = predict_overlaps(params);
  double aligned = 0.0;
  for (int i = 0; i < k; ++i) aligned += params.sigma[i] * a[i] * b[i] * z[i];
  double z_energy = 0.0;
  for (double zi : z) z_energy += zi * zi;
  ShrinkageChoice choice;
  choice.t_star = std::sqrt(params.alpha) * aligned / z_energy;
  choice.lambda_star = 1.0 / choice.t_star - 1.0;
  return choice;
}

}  // namespace optspace::theory
