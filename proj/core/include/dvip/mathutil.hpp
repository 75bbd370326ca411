#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace dvip {

inline constexpr double kLog2Pi = 1.8378770664093454836;

double log_norm_pdf(double x);
double norm_cdf(double x);

// log of the standard normal CDF. Uses erfc directly for moderate arguments
// and a continued-fraction evaluation of the scaled complementary error
// function for x < -5, so it never underflows however far into the tail.
double log_norm_cdf(double x);

// Inverse standard normal CDF for u in (0, 1).
double norm_quantile(double u);

double log_sum_exp(std::span<const double> xs);

// Nodes and weights for Gauss-Hermite quadrature with weight exp(-t*t):
// sum_k w_k f(t_k) approximates integral f(t) exp(-t*t) dt; weights sum to
// sqrt(pi). Nodes are returned in ascending order and are exactly symmetric
// about zero.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermite gauss_hermite(int order);

}  // namespace dvip
