#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dvip/priors.hpp"
#include "dvip/rng.hpp"
#include "dvip/tape.hpp"
#include "dvip/tensor.hpp"

namespace dvip {

// Empirical moments of a prior sample set: mean over samples and the centered,
// 1/sqrt(S)-scaled feature map phi, so that phi phi^T is the sample covariance.
struct EmpiricalMoments {
  Tensor mean;  // {B}
  Tensor phi;   // {B, S}
};
EmpiricalMoments empirical_moments(const PriorSampleSet& samples);

struct EmpiricalMomentsVars {
  ad::Var mean;  // {B,1}
  ad::Var phi;   // {B,S}
};
// samples_bs is the {B,S} matrix produced by sample_prior_on_tape.
EmpiricalMomentsVars empirical_moments_on_tape(ad::Tape& t, ad::Var samples_bs);

// Per-unit Gaussian over the S linear coefficients, with a Cholesky-factor
// scale L = strict_lower(tril) + diag(exp(logdiag)).
struct VariationalCoefficients {
  Tensor mean;     // {S,1}
  Tensor tril;     // {S,S}; only the strict lower triangle is used
  Tensor logdiag;  // {S,1}

  static VariationalCoefficients make(int num_samples);
};

struct UnitVars {
  ad::Var mean, tril, logdiag;
};

// Scale factor L as a tape node.
ad::Var coef_scale_on_tape(ad::Tape& t, const UnitVars& u, int num_samples);

// KL(q(a) || N(0, I)) for one unit:
// 0.5 * (||L||_F^2 + ||m||^2 - S - 2 sum(logdiag)).
ad::Var unit_kl_on_tape(ad::Tape& t, const UnitVars& u, int num_samples);
double unit_kl(const VariationalCoefficients& q);

// One stochastic-process layer: a shared prior sample set feeding H
// independent linear-coefficient units, plus (away from the output layer) a
// per-unit latent noise variance.
struct Layer {
  int in_dim = 0;
  int out_dim = 0;
  bool last = false;
  bool propagate = false;  // add the matching input coordinate to each unit mean
  int num_samples = 0;     // S
  Prior prior;
  std::vector<VariationalCoefficients> units;
  Tensor noise_logvar;  // {1, H}; only present (trainable) when !last

  static Layer make(int in_dim, int out_dim, bool last, bool propagate,
                    int num_samples, Prior prior);
};

struct LayerVars {
  PriorVars prior;
  std::vector<UnitVars> units;
  ad::Var noise_logvar;  // invalid when layer.last
};

struct LayerForward {
  ad::Var mean;     // {B,H}
  ad::Var var;      // {B,H}
  ad::Var sampled;  // {B,H}; invalid when sampling was not requested
  ad::Var phi;      // {B,S}
};

// Runs the layer on a tape: draws a fresh prior sample set with `prior_key`,
// forms per-unit conditional means/variances, and (when `draw_output`) samples
// outputs with one standard-normal draw per (unit, point id) from `noise_key`.
LayerForward layer_forward(ad::Tape& t, const Layer& layer, const LayerVars& v,
                           ad::Var input, rng::Key prior_key, rng::Key noise_key,
                           std::span<const std::int64_t> point_ids, bool draw_output);

}  // namespace dvip
