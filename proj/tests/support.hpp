#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "dvip/tensor.hpp"

// Shared helpers for the test binaries. The std:: generators here are the
// oracle side; library code never uses them.
namespace support {

inline std::mt19937_64 engine(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double rnorm(std::mt19937_64& g) {
  static thread_local std::normal_distribution<double> d(0.0, 1.0);
  return d(g);
}

inline double runif(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline dvip::Tensor random_tensor(std::mt19937_64& g, dvip::Shape shape,
                                  double lo = -1.0, double hi = 1.0) {
  dvip::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = runif(g, lo, hi);
  return t;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(std::span<const double> xs) {
  MeanSe out;
  const auto n = static_cast<double>(xs.size());
  for (double x : xs) out.mean += x;
  out.mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

// Cyclic Jacobi sweeps; plenty for the small symmetric matrices in tests.
inline std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n) {
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
  return eig;
}

inline double min_eigenvalue(const std::vector<double>& a, std::size_t n) {
  auto eig = symmetric_eigenvalues(a, n);
  double m = eig[0];
  for (double e : eig) m = std::min(m, e);
  return m;
}

inline double min_eigenvalue(const dvip::Tensor& a) {
  return min_eigenvalue(a.vals(), a.dim(0));
}

}  // namespace support
