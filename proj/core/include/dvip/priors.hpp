#pragma once

#include <cstdint>
#include <vector>

#include "dvip/rng.hpp"
#include "dvip/tape.hpp"
#include "dvip/tensor.hpp"

namespace dvip {

enum class PriorKind { kBnn, kCosineGp };

struct BnnPriorConfig {
  std::vector<int> hidden{10, 10};
  // false: each network layer shares one weight mean, one weight log-variance,
  // one bias mean and one bias log-variance (four scalars). true: independent
  // per-weight means and log-variances.
  bool per_weight = false;
};

struct CosineGpConfig {
  int width = 2000;  // number of cosine features
};

// Fully-connected tanh network whose weights are Gaussian with trainable
// moments; each prior function sample fixes one standard-normal draw per
// weight via the reparameterization w = mean + exp(logvar/2) * z.
struct BnnPrior {
  std::vector<int> widths;  // {input_dim, hidden..., 1}
  bool per_weight = false;
  std::vector<Tensor> w_mean, w_logvar, b_mean, b_logvar;  // one entry per net layer

  static BnnPrior make(int input_dim, const BnnPriorConfig& cfg);
  std::size_t num_net_layers() const { return widths.size() - 1; }
};

// Random cosine feature expansion of a squared-exponential GP: sample s is
// amplitude * sqrt(2/W) * sum_k a_{s,k} cos(omega_k . (x / lengthscales) + b_k)
// with frozen omega ~ N(0,I) and phases b ~ U[0, 2pi); only the coefficients
// a are redrawn per sample. Lengthscales are per input dimension (ARD).
struct CosineGpPrior {
  int width = 0;
  Tensor omega;            // {D, W}, frozen at construction
  Tensor phase;            // {1, W}, frozen at construction
  Tensor log_amplitude;    // scalar, trainable
  Tensor log_lengthscale;  // {1, D}, trainable, one per input dimension

  static CosineGpPrior make(int input_dim, const CosineGpConfig& cfg,
                            rng::Key freeze_key);
};

struct Prior {
  PriorKind kind = PriorKind::kBnn;
  BnnPrior bnn;
  CosineGpPrior cosgp;
};

// Tape-side handles to the trainable prior parameters.
struct BnnPriorVars {
  std::vector<ad::Var> w_mean, w_logvar, b_mean, b_logvar;
};
struct CosineGpVars {
  ad::Var log_amplitude, log_lengthscale;
};
struct PriorVars {
  BnnPriorVars bnn;
  CosineGpVars cosgp;
};

// Draws S prior function samples at the rows of x {B,D} and returns them as a
// {B,S} matrix on the tape, differentiable in the prior parameters. All
// standard-normal draws are pure functions of (key, sample index), so a given
// key always reproduces the same sample set.
ad::Var sample_prior_on_tape(ad::Tape& t, const Prior& prior, const PriorVars& vars,
                             ad::Var x, int num_samples, rng::Key key);

// Plain evaluation used outside training. values is {S, B}.
struct PriorSampleSet {
  Tensor values;
  std::uint64_t key_raw = 0;
};
PriorSampleSet sample_prior(const Prior& prior, const Tensor& x, int num_samples,
                            rng::Key key);

}  // namespace dvip
