#include "dvip/model.hpp"

#include <cmath>

#include "dvip/errors.hpp"
#include "dvip/mathutil.hpp"

namespace dvip {

namespace {
constexpr std::uint64_t kTagFreeze = 101;
constexpr std::uint64_t kTagPrior = 102;
constexpr std::uint64_t kTagNoise = 103;

std::vector<std::int64_t> default_ids(std::size_t n) {
  std::vector<std::int64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int64_t>(i);
  return ids;
}
}  // namespace

struct DvipModel::Bound {
  std::vector<LayerVars> layers;
  ad::Var lik_noise_logvar;
  std::vector<ad::Var> flat;  // same order as parameters()
};

DvipModel::DvipModel(ModelConfig cfg, std::int64_t train_size)
    : cfg_(cfg), train_size_(train_size) {
  if (cfg_.input_dim < 1) throw ContractViolation("model: input_dim must be >= 1");
  if (cfg_.depth < 1) throw ContractViolation("model: depth must be >= 1");
  if (cfg_.num_prior_samples < 2)
    throw ContractViolation("model: need at least two prior samples");
  if (train_size_ < 1) throw ContractViolation("model: train_size must be >= 1");
  if (cfg_.probit_quad_order < 2)
    throw ContractViolation("model: quadrature order must be >= 2");
  if (cfg_.objective == ObjectiveKind::kAlphaEnergy) {
    if (cfg_.depth != 1)
      throw ContractViolation("alpha-energy objective requires depth 1");
    if (cfg_.likelihood != LikelihoodKind::kGaussian)
      throw ContractViolation("alpha-energy objective requires a Gaussian likelihood");
    if (!(cfg_.alpha > 0.0 && cfg_.alpha <= 1.0))
      throw ContractViolation("alpha must lie in (0, 1]");
  }
  const int w = cfg_.resolved_inner_width();
  for (int l = 0; l < cfg_.depth; ++l) {
    const bool last = (l == cfg_.depth - 1);
    const int in = (l == 0) ? cfg_.input_dim : w;
    const int out = last ? 1 : w;
    const bool prop = cfg_.input_propagation && !last && in == out;
    Prior prior;
    prior.kind = cfg_.prior_kind;
    if (cfg_.prior_kind == PriorKind::kBnn) {
      prior.bnn = BnnPrior::make(in, cfg_.bnn);
    } else {
      prior.cosgp = CosineGpPrior::make(
          in, cfg_.cosgp,
          rng::Key(cfg_.seed).fold(kTagFreeze).fold(static_cast<std::uint64_t>(l)));
    }
    layers_.push_back(
        Layer::make(in, out, last, prop, cfg_.num_prior_samples, std::move(prior)));
  }
  lik_noise_logvar_ = Tensor::scalar(std::log(0.1));
}

double DvipModel::likelihood_noise_var() const {
  if (cfg_.likelihood == LikelihoodKind::kGaussian)
    return std::exp(lik_noise_logvar_.value());
  return 0.0;
}

std::vector<ParamRef> DvipModel::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Layer& layer = layers_[l];
    const std::string base = "layer" + std::to_string(l) + ".";
    if (layer.prior.kind == PriorKind::kBnn) {
      for (std::size_t k = 0; k < layer.prior.bnn.num_net_layers(); ++k) {
        const std::string pk = base + "prior.";
        out.push_back({pk + "w_mean" + std::to_string(k), &layer.prior.bnn.w_mean[k]});
        out.push_back({pk + "w_logvar" + std::to_string(k), &layer.prior.bnn.w_logvar[k]});
        out.push_back({pk + "b_mean" + std::to_string(k), &layer.prior.bnn.b_mean[k]});
        out.push_back({pk + "b_logvar" + std::to_string(k), &layer.prior.bnn.b_logvar[k]});
      }
    } else {
      out.push_back({base + "prior.log_amplitude", &layer.prior.cosgp.log_amplitude});
      out.push_back({base + "prior.log_lengthscale", &layer.prior.cosgp.log_lengthscale});
    }
    for (std::size_t h = 0; h < layer.units.size(); ++h) {
      const std::string uh = base + "unit" + std::to_string(h) + ".";
      out.push_back({uh + "coef_mean", &layer.units[h].mean});
      out.push_back({uh + "coef_tril", &layer.units[h].tril});
      out.push_back({uh + "coef_logdiag", &layer.units[h].logdiag});
    }
    if (!layer.last) out.push_back({base + "noise_logvar", &layer.noise_logvar});
  }
  if (cfg_.likelihood == LikelihoodKind::kGaussian)
    out.push_back({"likelihood.noise_logvar", &lik_noise_logvar_});
  return out;
}

DvipModel::Bound DvipModel::bind(ad::Tape& t, bool trainable) const {
  Bound b;
  auto put = [&](const Tensor& tensor) {
    ad::Var v = trainable ? t.leaf(tensor) : t.constant(tensor);
    b.flat.push_back(v);
    return v;
  };
  for (const Layer& layer : layers_) {
    LayerVars lv;
    if (layer.prior.kind == PriorKind::kBnn) {
      for (std::size_t k = 0; k < layer.prior.bnn.num_net_layers(); ++k) {
        lv.prior.bnn.w_mean.push_back(put(layer.prior.bnn.w_mean[k]));
        lv.prior.bnn.w_logvar.push_back(put(layer.prior.bnn.w_logvar[k]));
        lv.prior.bnn.b_mean.push_back(put(layer.prior.bnn.b_mean[k]));
        lv.prior.bnn.b_logvar.push_back(put(layer.prior.bnn.b_logvar[k]));
      }
    } else {
      lv.prior.cosgp.log_amplitude = put(layer.prior.cosgp.log_amplitude);
      lv.prior.cosgp.log_lengthscale = put(layer.prior.cosgp.log_lengthscale);
    }
    for (const VariationalCoefficients& u : layer.units) {
      UnitVars uv;
      uv.mean = put(u.mean);
      uv.tril = put(u.tril);
      uv.logdiag = put(u.logdiag);
      lv.units.push_back(uv);
    }
    if (!layer.last) lv.noise_logvar = put(layer.noise_logvar);
    b.layers.push_back(std::move(lv));
  }
  if (cfg_.likelihood == LikelihoodKind::kGaussian)
    b.lik_noise_logvar = put(lik_noise_logvar_);
  return b;
}

namespace {
struct PassOut {
  std::vector<ad::Var> layer_samples;
  ad::Var final_mean, final_var;
};
}  // namespace

// Internal: one stochastic pass through the stack. Inner layers are always
// sampled; the output layer is sampled only when draw_last is set. Prior
// sample sets are keyed by (model seed, layer) only: the S generative noise
// draws behind the sampled functions are part of the model's identity,
// frozen across iterations, passes and callers, so the coefficient
// posteriors face a stable basis that adapts only through the prior
// parameters. With a single layer the mixture components therefore
// coincide; only the per-point path noise varies with the caller's seed,
// iteration and pass.
static PassOut run_pass(ad::Tape& t, const std::vector<Layer>& layers,
                        const std::vector<LayerVars>& lvars, ad::Var x,
                        std::span<const std::int64_t> ids, std::uint64_t model_seed,
                        std::uint64_t seed, std::uint64_t iteration,
                        std::uint64_t pass, bool draw_last) {
  PassOut out;
  ad::Var cur = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    rng::Key prior_key = rng::Key(model_seed).fold(kTagPrior).fold(l);
    rng::Key noise_key =
        rng::Key(seed).fold(kTagNoise).fold(iteration).fold(pass).fold(l);
    const bool last = layers[l].last;
    const bool draw = !last || draw_last;
    LayerForward f = layer_forward(t, layers[l], lvars[l], cur, prior_key,
                                   noise_key, ids, draw);
    if (draw) out.layer_samples.push_back(f.sampled);
    if (last) {
      out.final_mean = f.mean;
      out.final_var = f.var;
    } else {
      cur = f.sampled;
    }
  }
  return out;
}

EvalResult DvipModel::objective_eval(const Tensor& x, const Tensor& y,
                                     std::span<const std::int64_t> point_ids,
                                     std::uint64_t seed, std::uint64_t iteration,
                                     bool want_grads, int num_passes) const {
  using namespace ad;
  if (x.rank() != 2 || x.dim(1) != static_cast<std::size_t>(cfg_.input_dim))
    throw ContractViolation("objective_eval: x must be {B," +
                            std::to_string(cfg_.input_dim) + "}, got " +
                            shape_str(x.shape()));
  const std::size_t batch = x.dim(0);
  if (batch < 1) throw ContractViolation("objective_eval: empty batch");
  if (y.rank() != 2 || y.dim(0) != batch || y.dim(1) != 1)
    throw ContractViolation("objective_eval: y must be {B,1}, got " +
                            shape_str(y.shape()));
  if (point_ids.size() != batch)
    throw ContractViolation("objective_eval: need one point id per row");
  if (num_passes < 1) throw ContractViolation("objective_eval: num_passes >= 1");
  if (cfg_.likelihood == LikelihoodKind::kProbit) {
    for (std::size_t i = 0; i < batch; ++i)
      if (y[i] != 1.0 && y[i] != -1.0)
        throw ContractViolation("objective_eval: probit labels must be +1 or -1");
  }

  Tape t;
  Bound b = bind(t, want_grads);
  Var xs = t.constant(x);
  Var ys = t.constant(y);
  GaussHermite gh;
  if (cfg_.likelihood == LikelihoodKind::kProbit)
    gh = gauss_hermite(cfg_.probit_quad_order);

  Var data_acc{};
  for (int r = 0; r < num_passes; ++r) {
    PassOut po = run_pass(t, layers_, b.layers, xs, point_ids, cfg_.seed, seed,
                          iteration, static_cast<std::uint64_t>(r), false);
    Var per_point{};
    if (cfg_.objective == ObjectiveKind::kAlphaEnergy) {
      // (1/a) log E_q[N(y|f,s2)^a] for f ~ N(m,v), in closed form:
      // -log(2 pi s2)/2 + log(s2/(s2+a v))/(2a) - (y-m)^2 / (2 (s2+a v)).
      const double a = cfg_.alpha;
      Var s2 = exp(b.lik_noise_logvar);
      Var denom = add(scale(po.final_var, a), s2);
      Var t1 = scale(log(s2) + kLog2Pi, -0.5);
      Var t2 = scale(sub(log(s2), log(denom)), 1.0 / (2.0 * a));
      Var t3 = div(square(sub(ys, po.final_mean)), scale(denom, 2.0));
      per_point = sub(add(t1, t2), t3);
    } else if (cfg_.likelihood == LikelihoodKind::kGaussian) {
      Var s2 = exp(b.lik_noise_logvar);
      per_point = gaussian_expected_log_density(ys, po.final_mean, po.final_var, s2);
    } else {
      per_point = probit_expected_loglik(ys, po.final_mean, po.final_var, gh);
    }
    data_acc = (r == 0) ? per_point : add(data_acc, per_point);
  }
  if (num_passes > 1) data_acc = scale(data_acc, 1.0 / num_passes);

  const double rescale =
      static_cast<double>(train_size_) / static_cast<double>(batch);
  Var data_term = scale(sum_all(data_acc), rescale);

  Var kl{};
  bool have_kl = false;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    for (std::size_t h = 0; h < layers_[l].units.size(); ++h) {
      Var u = unit_kl_on_tape(t, b.layers[l].units[h], layers_[l].num_samples);
      kl = have_kl ? add(kl, u) : u;
      have_kl = true;
    }
  Var obj = sub(data_term, kl);

  EvalResult res;
  res.data_term = t.value(data_term).value();
  res.kl_term = t.value(kl).value();
  res.value = t.value(obj).value();
  if (!std::isfinite(res.data_term))
    throw NumericError("objective: data term is non-finite");
  if (!std::isfinite(res.kl_term))
    throw NumericError("objective: kl term is non-finite");
  if (!std::isfinite(res.value))
    throw NumericError("objective: value is non-finite");

  if (want_grads) {
    t.backward(obj);
    res.grads.reserve(b.flat.size());
    for (ad::Var v : b.flat) res.grads.push_back(t.adjoint(v));
  }
  return res;
}

ForwardSample DvipModel::forward_sample(const Tensor& x, std::uint64_t seed,
                                        std::uint64_t pass,
                                        std::span<const std::int64_t> point_ids) const {
  if (x.rank() != 2 || x.dim(1) != static_cast<std::size_t>(cfg_.input_dim))
    throw ContractViolation("forward_sample: x must be {B," +
                            std::to_string(cfg_.input_dim) + "}, got " +
                            shape_str(x.shape()));
  std::vector<std::int64_t> fallback;
  if (point_ids.empty()) {
    fallback = default_ids(x.dim(0));
    point_ids = fallback;
  }
  ad::Tape t;
  Bound b = bind(t, false);
  ad::Var xs = t.constant(x);
  PassOut po = run_pass(t, layers_, b.layers, xs, point_ids, cfg_.seed, seed, 0,
                        pass, true);
  ForwardSample out;
  for (ad::Var v : po.layer_samples) out.layer_samples.push_back(t.value(v));
  out.final_mean = t.value(po.final_mean);
  out.final_var = t.value(po.final_var);
  return out;
}

PredictiveMixture DvipModel::predict(const Tensor& x, int num_passes,
                                     std::uint64_t seed) const {
  if (num_passes < 1) throw ContractViolation("predict: num_passes must be >= 1");
  if (x.rank() != 2 || x.dim(1) != static_cast<std::size_t>(cfg_.input_dim))
    throw ContractViolation("predict: x must be {B," +
                            std::to_string(cfg_.input_dim) + "}, got " +
                            shape_str(x.shape()));
  const std::size_t batch = x.dim(0);
  std::vector<std::int64_t> ids = default_ids(batch);
  PredictiveMixture mix;
  mix.means = Tensor({batch, static_cast<std::size_t>(num_passes)});
  mix.vars = Tensor({batch, static_cast<std::size_t>(num_passes)});
  for (int r = 0; r < num_passes; ++r) {
    ad::Tape t;
    Bound b = bind(t, false);
    ad::Var xs = t.constant(x);
    PassOut po = run_pass(t, layers_, b.layers, xs, ids, cfg_.seed, seed, 0,
                          static_cast<std::uint64_t>(r), false);
    const Tensor& m = t.value(po.final_mean);
    const Tensor& v = t.value(po.final_var);
    for (std::size_t i = 0; i < batch; ++i) {
      mix.means.at(i, static_cast<std::size_t>(r)) = m[i];
      mix.vars.at(i, static_cast<std::size_t>(r)) = v[i];
    }
  }
  return mix;
}

PriorSampleSet DvipModel::sample_prior_functions(std::size_t layer, const Tensor& x,
                                                 int num_samples) const {
  if (layer >= layers_.size())
    throw ContractViolation("sample_prior_functions: layer index out of range");
  const Layer& ly = layers_[layer];
  if (x.rank() != 2 || x.dim(1) != static_cast<std::size_t>(ly.in_dim))
    throw ContractViolation("sample_prior_functions: x must be {B," +
                            std::to_string(ly.in_dim) + "}, got " +
                            shape_str(x.shape()));
  rng::Key key = rng::Key(cfg_.seed).fold(kTagPrior).fold(layer);
  return sample_prior(ly.prior, x, num_samples, key);
}

double DvipModel::total_kl() const {
  double kl = 0.0;
  for (const Layer& layer : layers_)
    for (const VariationalCoefficients& u : layer.units) kl += unit_kl(u);
  return kl;
}

Tensor predictive_log_density(const PredictiveMixture& mix, const Tensor& y,
                              double noise_var) {
  if (mix.means.rank() != 2 || !mix.means.same_shape(mix.vars))
    throw ContractViolation("predictive_log_density: bad mixture shape");
  const std::size_t b = mix.means.dim(0), r = mix.means.dim(1);
  if (y.numel() != b)
    throw ContractViolation("predictive_log_density: y length mismatch");
  Tensor out({b});
  std::vector<double> comps(r);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < r; ++j)
      comps[j] = gaussian_log_density(y[i], mix.means.at(i, j),
                                      mix.vars.at(i, j) + noise_var);
    out[i] = log_sum_exp(comps) - std::log(static_cast<double>(r));
  }
  return out;
}

}  // namespace dvip
