#include "dvip/likelihood.hpp"

#include <cmath>

#include "dvip/errors.hpp"

namespace dvip {

double gaussian_log_density(double y, double mean, double var) {
  double d = y - mean;
  return -0.5 * (std::log(var) + kLog2Pi) - d * d / (2.0 * var);
}

double gaussian_expected_log_density(double y, double fmean, double fvar,
                                     double noise_var) {
  return gaussian_log_density(y, fmean, noise_var) - fvar / (2.0 * noise_var);
}

double probit_expected_loglik(double y, double fmean, double fvar,
                              const GaussHermite& gh) {
  const int n = static_cast<int>(gh.nodes.size());
  const double sd = std::sqrt(2.0 * fvar);
  auto term = [&](int k) {
    return gh.weights[static_cast<std::size_t>(k)] *
           log_norm_cdf(y * (fmean + sd * gh.nodes[static_cast<std::size_t>(k)]));
  };
  double acc = 0.0;
  for (int k = 0; k < n / 2; ++k) acc += term(k) + term(n - 1 - k);
  if (n % 2 == 1) acc += term(n / 2);
  return acc / std::sqrt(M_PI);
}

double probit_predictive_proba(double fmean, double fvar) {
  return norm_cdf(fmean / std::sqrt(1.0 + fvar));
}

Tensor binary_predictive_proba(const Tensor& means, const Tensor& vars) {
  if (means.rank() != 2 || !means.same_shape(vars))
    throw ContractViolation("binary_predictive_proba: means/vars must be matching rank-2");
  const std::size_t b = means.dim(0), r = means.dim(1);
  Tensor out({b});
  for (std::size_t i = 0; i < b; ++i) {
    double p = 0.0;
    for (std::size_t j = 0; j < r; ++j)
      p += probit_predictive_proba(means.at(i, j), vars.at(i, j));
    out[i] = p / static_cast<double>(r);
  }
  return out;
}

ad::Var gaussian_expected_log_density(ad::Var y, ad::Var fmean, ad::Var fvar,
                                      ad::Var noise_var) {
  using namespace ad;
  Var resid = square(sub(y, fmean));
  Var two_var = scale(noise_var, 2.0);
  Var quad = div(add(resid, fvar), two_var);
  Var logz = scale(log(noise_var) + kLog2Pi, -0.5);
  return sub(logz, quad);
}

ad::Var probit_expected_loglik(ad::Var ysign, ad::Var fmean, ad::Var fvar,
                               const GaussHermite& gh) {
  using namespace ad;
  const int n = static_cast<int>(gh.nodes.size());
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  Var sd = sqrt(scale(fvar, 2.0));
  auto term = [&](int k) {
    auto ku = static_cast<std::size_t>(k);
    Var arg = mul(ysign, add(fmean, scale(sd, gh.nodes[ku])));
    return scale(log_norm_cdf(arg), gh.weights[ku] * inv_sqrt_pi);
  };
  Var acc{};
  bool first = true;
  for (int k = 0; k < n / 2; ++k) {
    Var pair = add(term(k), term(n - 1 - k));
    acc = first ? pair : add(acc, pair);
    first = false;
  }
  if (n % 2 == 1) {
    Var mid = term(n / 2);
    acc = first ? mid : add(acc, mid);
  }
  return acc;
}

}  // namespace dvip
