#pragma once

#include "dvip/mathutil.hpp"
#include "dvip/tape.hpp"
#include "dvip/tensor.hpp"

namespace dvip {

// log N(y | mean, var)
double gaussian_log_density(double y, double mean, double var);

// E_{f ~ N(fmean, fvar)} [ log N(y | f, noise_var) ], available in closed form.
double gaussian_expected_log_density(double y, double fmean, double fvar,
                                     double noise_var);

// E_{f ~ N(fmean, fvar)} [ log Phi(y f) ] for labels y in {-1,+1}, by
// Gauss-Hermite quadrature. Terms are accumulated over symmetric node pairs,
// so flipping the label's sign is exactly equivalent to negating fmean.
double probit_expected_loglik(double y, double fmean, double fvar,
                              const GaussHermite& gh);

// Class probability P(y=+1) under a Gaussian latent: Phi(m / sqrt(1 + v)).
double probit_predictive_proba(double fmean, double fvar);

// Mixture class probability averaged over R components. means/vars are {B,R};
// returns {B}.
Tensor binary_predictive_proba(const Tensor& means, const Tensor& vars);

// Tape versions for the training objective. All inputs are {B,1}; noise_var
// is a positive scalar var and broadcasts. Each returns per-point values {B,1}.
ad::Var gaussian_expected_log_density(ad::Var y, ad::Var fmean, ad::Var fvar,
                                      ad::Var noise_var);
ad::Var probit_expected_loglik(ad::Var ysign, ad::Var fmean, ad::Var fvar,
                               const GaussHermite& gh);

}  // namespace dvip
