#include "dvip/mathutil.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dvip/errors.hpp"

namespace dvip {

double log_norm_pdf(double x) { return -0.5 * x * x - 0.5 * kLog2Pi; }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

namespace {

// Scaled complementary error function erfcx(z) = exp(z*z) erfc(z) for z > 0,
// evaluated with the Laplace continued fraction (modified Lentz). Accurate to
// near machine precision for z >= ~3, which is the only regime we use it in.
double erfcx_cf(double z) {
  const double tiny = 1e-300;
  double f = tiny, c = f, d = 0.0;
  for (int n = 0; n < 120; ++n) {
    // a_1 = 1, b_1 = z; thereafter a_n = (n-1)/2, b_n = z.
    double a = (n == 0) ? 1.0 : 0.5 * n;
    d = z + a * d;
    if (d == 0.0) d = tiny;
    c = z + a / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-17) break;
  }
  return f / std::sqrt(M_PI);
}

}  // namespace

double log_norm_cdf(double x) {
  if (x >= -5.0) {
    return std::log(norm_cdf(x));
  }
  // Phi(x) = 0.5 erfc(z) = 0.5 exp(-z*z) erfcx(z) with z = -x/sqrt(2).
  double z = -x * M_SQRT1_2;
  return -z * z + std::log(0.5 * erfcx_cf(z));
}

double norm_quantile(double u) {
  if (!(u > 0.0 && u < 1.0))
    throw ContractViolation("norm_quantile: u=" + std::to_string(u) +
                            " outside (0,1)");
  // Acklam's rational approximation, then two Newton refinements driven by
  // the erfc-based CDF.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (u < plow) {
    double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - plow) {
    double q = u - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    double e = norm_cdf(x) - u;
    double pdf = std::exp(log_norm_pdf(x));
    if (pdf <= 0.0) break;
    x -= e / pdf;
  }
  return x;
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) throw ContractViolation("log_sum_exp: empty input");
  double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;  // all -inf, or a nan/inf dominates
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

GaussHermite gauss_hermite(int order) {
  if (order < 2 || order > 100)
    throw ContractViolation("gauss_hermite: order must lie in [2, 100]");
  const int n = order;
  GaussHermite out;
  out.nodes.assign(n, 0.0);
  out.weights.assign(n, 0.0);
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    // Initial guesses for the descending positive roots (Stroud/Secrest).
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(n, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * out.nodes[n - 1];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * out.nodes[n - 2];
    } else {
      z = 2.0 * z - out.nodes[n - i + 1];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Orthonormal Hermite recurrence up to degree n.
      double p1 = pim4, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    out.nodes[n - 1 - i] = z;
    out.nodes[i] = -z;
    out.weights[n - 1 - i] = 2.0 / (pp * pp);
    out.weights[i] = out.weights[n - 1 - i];
  }
  if (n % 2 == 1) out.nodes[half - 1] = 0.0;  // exact center
  return out;
}

}  // namespace dvip
