#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dvip/layer.hpp"
#include "dvip/likelihood.hpp"
#include "dvip/tensor.hpp"

namespace dvip {

enum class LikelihoodKind { kGaussian, kProbit };
enum class ObjectiveKind { kElbo, kAlphaEnergy };

struct ModelConfig {
  int input_dim = 0;  // 0 until inferred from data; must be >= 1 to build
  int depth = 1;
  int inner_width = 0;  // 0 means min(input_dim, 30)
  int num_prior_samples = 20;
  PriorKind prior_kind = PriorKind::kBnn;
  BnnPriorConfig bnn;
  CosineGpConfig cosgp;
  LikelihoodKind likelihood = LikelihoodKind::kGaussian;
  int probit_quad_order = 20;
  bool input_propagation = true;
  ObjectiveKind objective = ObjectiveKind::kElbo;
  double alpha = 0.5;  // only read for the alpha-energy objective
  std::uint64_t seed = 0;

  int resolved_inner_width() const {
    return inner_width > 0 ? inner_width : std::min(input_dim, 30);
  }
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

struct ForwardSample {
  std::vector<Tensor> layer_samples;  // one {B, H_l} per layer
  Tensor final_mean;                  // {B,1}
  Tensor final_var;                   // {B,1}
};

struct PredictiveMixture {
  Tensor means;  // {B,R}
  Tensor vars;   // {B,R}
};

struct EvalResult {
  double value = 0.0;
  double data_term = 0.0;  // rescaled expected log-likelihood (or energy) part
  double kl_term = 0.0;
  std::vector<Tensor> grads;  // aligned with parameters(); empty unless requested
};

// Stack of stochastic-process layers with a Gaussian or probit observation
// model, trained by maximizing either the evidence lower bound or (single
// layer only) an alpha-divergence energy. All randomness is keyed, so every
// quantity is a pure function of (parameters, inputs, seed, iteration).
class DvipModel {
 public:
  DvipModel(ModelConfig cfg, std::int64_t train_size);

  const ModelConfig& config() const { return cfg_; }
  std::int64_t train_size() const { return train_size_; }
  const std::vector<Layer>& layers() const { return layers_; }
  double likelihood_noise_var() const;

  // Trainable tensors in a fixed, documented order: per layer, prior
  // parameters, then per-unit coefficient parameters, then the layer noise
  // log-variance (inner layers); finally the likelihood noise log-variance.
  std::vector<ParamRef> parameters();

  // Stochastic objective on one batch. `point_ids` must carry the global row
  // ids of the batch rows; noise draws are keyed by them. The data term is
  // rescaled by train_size / batch_size. Averages over `num_passes` latent
  // passes (the KL term is pass-independent).
  EvalResult objective_eval(const Tensor& x, const Tensor& y,
                            std::span<const std::int64_t> point_ids,
                            std::uint64_t seed, std::uint64_t iteration,
                            bool want_grads, int num_passes = 1) const;

  // One full stochastic pass: sampled values at every layer plus the final
  // layer's Gaussian conditional. Empty `point_ids` means rows 0..B-1.
  ForwardSample forward_sample(const Tensor& x, std::uint64_t seed,
                               std::uint64_t pass = 0,
                               std::span<const std::int64_t> point_ids = {}) const;

  // Mixture predictive: `num_passes` independent passes, one Gaussian
  // component per pass.
  PredictiveMixture predict(const Tensor& x, int num_passes,
                            std::uint64_t seed) const;

  // Prior function draws of one layer at the rows of x, using the same key
  // stream the forward passes use; those draws are frozen per (seed, layer),
  // so this returns exactly the basis the objective sees. values is {S, B}.
  PriorSampleSet sample_prior_functions(std::size_t layer, const Tensor& x,
                                        int num_samples) const;

  double total_kl() const;

 private:
  struct Bound;
  Bound bind(ad::Tape& t, bool trainable) const;

  ModelConfig cfg_;
  std::int64_t train_size_;
  std::vector<Layer> layers_;
  Tensor lik_noise_logvar_;  // scalar; only used for the Gaussian likelihood
};

// Per-point log density of a uniform Gaussian mixture with observation noise
// added to each component's variance; returns {B}.
Tensor predictive_log_density(const PredictiveMixture& mix, const Tensor& y,
                              double noise_var);

}  // namespace dvip
