#include "dvip/metrics.hpp"

#include <cmath>

#include "dvip/errors.hpp"
#include "dvip/mathutil.hpp"

namespace dvip {

double rmse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty())
    throw ContractViolation("rmse: length mismatch or empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - target[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double test_nll(const PredictiveMixture& mix, const Tensor& y, double noise_var,
                double target_scale) {
  Tensor lp = predictive_log_density(mix, y, noise_var);
  double s = 0.0;
  for (std::size_t i = 0; i < lp.numel(); ++i) s += lp[i];
  return -s / static_cast<double>(lp.numel()) + std::log(target_scale);
}

namespace {
// E|Z - d| for Z ~ N(0, v): the building block of Gaussian-mixture CRPS.
double expected_abs(double d, double v) {
  if (v <= 0.0) return std::abs(d);
  double sd = std::sqrt(v);
  double z = d / sd;
  return sd * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * std::exp(log_norm_pdf(z)));
}
}  // namespace

double crps_gaussian(double y, double mean, double var) {
  // CRPS(N(m,v), y) = E|F - y| - E|F - F'|/2 with F, F' iid N(m, v).
  return expected_abs(y - mean, var) - 0.5 * expected_abs(0.0, 2.0 * var);
}

double crps_mixture(const PredictiveMixture& mix, const Tensor& y, double noise_var,
                    double target_scale) {
  const std::size_t b = mix.means.dim(0), r = mix.means.dim(1);
  if (y.numel() != b) throw ContractViolation("crps_mixture: y length mismatch");
  const double wr = 1.0 / static_cast<double>(r);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double first = 0.0;
    for (std::size_t j = 0; j < r; ++j)
      first += wr * expected_abs(y[i] - mix.means.at(i, j),
                                 mix.vars.at(i, j) + noise_var);
    double second = 0.0;
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t k = 0; k < r; ++k)
        second += wr * wr *
                  expected_abs(mix.means.at(i, j) - mix.means.at(i, k),
                               mix.vars.at(i, j) + mix.vars.at(i, k) + 2.0 * noise_var);
    total += first - 0.5 * second;
  }
  return target_scale * total / static_cast<double>(b);
}

std::vector<double> mixture_mean(const PredictiveMixture& mix) {
  const std::size_t b = mix.means.dim(0), r = mix.means.dim(1);
  std::vector<double> out(b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < r; ++j) out[i] += mix.means.at(i, j);
    out[i] /= static_cast<double>(r);
  }
  return out;
}

BinaryMetrics binary_metrics(const Tensor& proba, const Tensor& y) {
  const std::size_t n = proba.numel();
  if (y.numel() != n || n == 0)
    throw ContractViolation("binary_metrics: length mismatch or empty input");
  BinaryMetrics m;
  double correct = 0.0, ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = (proba[i] >= 0.5) ? 1.0 : -1.0;
    if (pred == y[i]) correct += 1.0;
    double p = (y[i] > 0.0) ? proba[i] : 1.0 - proba[i];
    ll += std::log(p);
  }
  m.accuracy = correct / static_cast<double>(n);
  m.mean_loglik = ll / static_cast<double>(n);
  return m;
}

Aggregate aggregate(std::span<const double> xs) {
  if (xs.empty()) throw ContractViolation("aggregate: empty input");
  Aggregate a;
  for (double x : xs) a.mean += x;
  a.mean /= static_cast<double>(xs.size());
  if (xs.size() == 1) return a;
  double ss = 0.0;
  for (double x : xs) {
    double c = x - a.mean;
    ss += c * c;
  }
  double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  a.stderr_of_mean = sd / std::sqrt(static_cast<double>(xs.size()));
  return a;
}

}  // namespace dvip
