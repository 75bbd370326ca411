#pragma once

#include <span>

#include "dvip/model.hpp"
#include "dvip/tensor.hpp"

namespace dvip {

double rmse(std::span<const double> pred, std::span<const double> target);

// Mean negative log predictive density plus log(target_scale): metrics on
// standardized targets carried back to the raw target units.
double test_nll(const PredictiveMixture& mix, const Tensor& y, double noise_var,
                double target_scale);

// Closed-form CRPS of N(mean, var) at y.
double crps_gaussian(double y, double mean, double var);

// Closed-form CRPS of a uniform Gaussian mixture (noise added per component),
// averaged over points and multiplied by target_scale.
double crps_mixture(const PredictiveMixture& mix, const Tensor& y, double noise_var,
                    double target_scale);

// Mean of the per-pass component means: the predictive mean per point.
std::vector<double> mixture_mean(const PredictiveMixture& mix);

struct BinaryMetrics {
  double accuracy = 0.0;
  double mean_loglik = 0.0;
};
// proba holds P(y=+1) per point; labels are +-1. Probability 0.5 predicts +1.
BinaryMetrics binary_metrics(const Tensor& proba, const Tensor& y);

struct Aggregate {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
};
Aggregate aggregate(std::span<const double> xs);

}  // namespace dvip
