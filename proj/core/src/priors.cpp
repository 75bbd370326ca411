#include "dvip/priors.hpp"

#include <cmath>

#include "dvip/errors.hpp"

namespace dvip {

namespace {
// Sub-stream tags so weight, bias and coefficient draws never collide.
constexpr std::uint64_t kWeightDraw = 1;
constexpr std::uint64_t kBiasDraw = 2;
constexpr std::uint64_t kCoefDraw = 3;
}  // namespace

BnnPrior BnnPrior::make(int input_dim, const BnnPriorConfig& cfg) {
  if (input_dim < 1) throw ContractViolation("bnn prior: input_dim must be >= 1");
  BnnPrior p;
  p.per_weight = cfg.per_weight;
  p.widths.push_back(input_dim);
  for (int h : cfg.hidden) {
    if (h < 1) throw ContractViolation("bnn prior: hidden width must be >= 1");
    p.widths.push_back(h);
  }
  p.widths.push_back(1);
  for (std::size_t k = 0; k + 1 < p.widths.size(); ++k) {
    auto in = static_cast<std::size_t>(p.widths[k]);
    auto out = static_cast<std::size_t>(p.widths[k + 1]);
    if (cfg.per_weight) {
      p.w_mean.push_back(Tensor::zeros({in, out}));
      p.w_logvar.push_back(Tensor::zeros({in, out}));
      p.b_mean.push_back(Tensor::zeros({1, out}));
      p.b_logvar.push_back(Tensor::zeros({1, out}));
    } else {
      p.w_mean.push_back(Tensor::scalar(0.0));
      p.w_logvar.push_back(Tensor::scalar(0.0));
      p.b_mean.push_back(Tensor::scalar(0.0));
      p.b_logvar.push_back(Tensor::scalar(0.0));
    }
  }
  return p;
}

CosineGpPrior CosineGpPrior::make(int input_dim, const CosineGpConfig& cfg,
                                  rng::Key freeze_key) {
  if (cfg.width < 1) throw ContractViolation("cosine gp prior: width must be >= 1");
  CosineGpPrior p;
  p.width = cfg.width;
  auto d = static_cast<std::size_t>(input_dim);
  auto w = static_cast<std::size_t>(cfg.width);
  p.omega = freeze_key.fold(kWeightDraw).normal_tensor({d, w});
  p.phase = freeze_key.fold(kBiasDraw).uniform_tensor({1, w});
  for (std::size_t i = 0; i < p.phase.numel(); ++i) p.phase[i] *= 2.0 * M_PI;
  p.log_amplitude = Tensor::scalar(0.0);
  p.log_lengthscale = Tensor::zeros({1, d});
  return p;
}

namespace {

ad::Var sample_bnn(ad::Tape& t, const BnnPrior& p, const BnnPriorVars& v, ad::Var x,
                   int num_samples, rng::Key key) {
  using namespace ad;
  const std::size_t rows = t.value(x).dim(0);
  std::vector<Var> cols;
  cols.reserve(static_cast<std::size_t>(num_samples));
  for (int s = 0; s < num_samples; ++s) {
    rng::Key ks = key.fold(static_cast<std::uint64_t>(s));
    Var h = x;
    for (std::size_t k = 0; k < p.num_net_layers(); ++k) {
      auto in = static_cast<std::size_t>(p.widths[k]);
      auto out = static_cast<std::size_t>(p.widths[k + 1]);
      rng::Key kl = ks.fold(k);
      Var zw = t.constant(kl.fold(kWeightDraw).normal_tensor({in, out}));
      Var zb = t.constant(kl.fold(kBiasDraw).normal_tensor({1, out}));
      Var wsd = exp(scale(v.w_logvar[k], 0.5));
      Var bsd = exp(scale(v.b_logvar[k], 0.5));
      // Shared scalars broadcast over the weight matrix; per-weight tensors
      // already have matching shape.
      Var weight = add(broadcast_to(v.w_mean[k], {in, out}),
                       mul(broadcast_to(wsd, {in, out}), zw));
      Var bias = add(broadcast_to(v.b_mean[k], {1, out}),
                     mul(broadcast_to(bsd, {1, out}), zb));
      h = add(matmul(h, weight), broadcast_to(bias, {rows, out}));
      if (k + 1 < p.num_net_layers()) h = tanh(h);
    }
    cols.push_back(h);  // {B,1}
  }
  return concat_cols(cols);
}

ad::Var sample_cosine_gp(ad::Tape& t, const CosineGpPrior& p, const CosineGpVars& v,
                         ad::Var x, int num_samples, rng::Key key) {
  using namespace ad;
  auto w = static_cast<std::size_t>(p.width);
  Var inv_ls = exp(neg(v.log_lengthscale));
  Var scaled = mul(x, inv_ls);
  Var proj = add(matmul(scaled, t.constant(p.omega)),
                 broadcast_to(t.constant(p.phase), {t.value(x).dim(0), w}));
  Var feats = scale(cos(proj), std::sqrt(2.0 / static_cast<double>(p.width)));
  // One coefficient column per sample, keyed by the sample index.
  Tensor coef({w, static_cast<std::size_t>(num_samples)});
  for (int s = 0; s < num_samples; ++s) {
    rng::Key ks = key.fold(static_cast<std::uint64_t>(s)).fold(kCoefDraw);
    for (std::size_t i = 0; i < w; ++i)
      coef.at(i, static_cast<std::size_t>(s)) = ks.normal(i);
  }
  return mul(matmul(feats, t.constant(coef)), exp(v.log_amplitude));
}

}  // namespace

ad::Var sample_prior_on_tape(ad::Tape& t, const Prior& prior, const PriorVars& vars,
                             ad::Var x, int num_samples, rng::Key key) {
  if (num_samples < 1)
    throw ContractViolation("sample_prior: need at least one sample");
  if (t.value(x).rank() != 2)
    throw ContractViolation("sample_prior: inputs must be {B,D}");
  switch (prior.kind) {
    case PriorKind::kBnn:
      return sample_bnn(t, prior.bnn, vars.bnn, x, num_samples, key);
    case PriorKind::kCosineGp:
      return sample_cosine_gp(t, prior.cosgp, vars.cosgp, x, num_samples, key);
  }
  throw ContractViolation("sample_prior: unknown prior kind");
}

PriorSampleSet sample_prior(const Prior& prior, const Tensor& x, int num_samples,
                            rng::Key key) {
  ad::Tape t;
  PriorVars vars;
  if (prior.kind == PriorKind::kBnn) {
    for (std::size_t k = 0; k < prior.bnn.num_net_layers(); ++k) {
      vars.bnn.w_mean.push_back(t.constant(prior.bnn.w_mean[k]));
      vars.bnn.w_logvar.push_back(t.constant(prior.bnn.w_logvar[k]));
      vars.bnn.b_mean.push_back(t.constant(prior.bnn.b_mean[k]));
      vars.bnn.b_logvar.push_back(t.constant(prior.bnn.b_logvar[k]));
    }
  } else {
    vars.cosgp.log_amplitude = t.constant(prior.cosgp.log_amplitude);
    vars.cosgp.log_lengthscale = t.constant(prior.cosgp.log_lengthscale);
  }
  ad::Var xs = t.constant(x);
  ad::Var out = sample_prior_on_tape(t, prior, vars, xs, num_samples, key);
  PriorSampleSet set;
  set.key_raw = key.raw();
  const Tensor& bs = t.value(out);  // {B,S}
  Tensor sb({bs.dim(1), bs.dim(0)});
  for (std::size_t i = 0; i < bs.dim(0); ++i)
    for (std::size_t j = 0; j < bs.dim(1); ++j) sb.at(j, i) = bs.at(i, j);
  set.values = std::move(sb);
  return set;
}

}  // namespace dvip
