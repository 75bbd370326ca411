#include "dvip/layer.hpp"

#include <cmath>

#include "dvip/errors.hpp"

namespace dvip {

EmpiricalMoments empirical_moments(const PriorSampleSet& samples) {
  const Tensor& v = samples.values;
  if (v.rank() != 2) throw ContractViolation("empirical_moments: values must be {S,B}");
  const std::size_t s = v.dim(0), b = v.dim(1);
  EmpiricalMoments m;
  m.mean = Tensor({b});
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < b; ++j) m.mean[j] += v.at(i, j);
  for (std::size_t j = 0; j < b; ++j) m.mean[j] /= static_cast<double>(s);
  m.phi = Tensor({b, s});
  const double inv = 1.0 / std::sqrt(static_cast<double>(s));
  for (std::size_t j = 0; j < b; ++j)
    for (std::size_t i = 0; i < s; ++i)
      m.phi.at(j, i) = (v.at(i, j) - m.mean[j]) * inv;
  return m;
}

EmpiricalMomentsVars empirical_moments_on_tape(ad::Tape& t, ad::Var samples_bs) {
  using namespace ad;
  const std::size_t b = t.value(samples_bs).dim(0);
  const std::size_t s = t.value(samples_bs).dim(1);
  EmpiricalMomentsVars out;
  out.mean = reshape(mean_axis(samples_bs, 1), {b, 1});
  out.phi = scale(sub(samples_bs, out.mean), 1.0 / std::sqrt(static_cast<double>(s)));
  return out;
}

VariationalCoefficients VariationalCoefficients::make(int num_samples) {
  auto s = static_cast<std::size_t>(num_samples);
  VariationalCoefficients q;
  q.mean = Tensor::zeros({s, 1});
  q.tril = Tensor::zeros({s, s});
  q.logdiag = Tensor::full({s, 1}, std::log(1e-2));
  return q;
}

ad::Var coef_scale_on_tape(ad::Tape& t, const UnitVars& u, int num_samples) {
  using namespace ad;
  auto s = static_cast<std::size_t>(num_samples);
  Tensor eye({s, s});
  for (std::size_t i = 0; i < s; ++i) eye.at(i, i) = 1.0;
  Var diag = mul(exp(u.logdiag), t.constant(std::move(eye)));
  return add(tril_mask(u.tril, false), diag);
}

ad::Var unit_kl_on_tape(ad::Tape& t, const UnitVars& u, int num_samples) {
  using namespace ad;
  Var l = coef_scale_on_tape(t, u, num_samples);
  Var fro = add(sum_all(square(l)), sum_all(square(u.mean)));
  Var core = sub(fro - static_cast<double>(num_samples), scale(sum_all(u.logdiag), 2.0));
  return scale(core, 0.5);
}

double unit_kl(const VariationalCoefficients& q) {
  const std::size_t s = q.mean.dim(0);
  double fro = 0.0, msq = 0.0, logd = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < i; ++j) fro += q.tril.at(i, j) * q.tril.at(i, j);
    double d = std::exp(q.logdiag[i]);
    fro += d * d;
    logd += q.logdiag[i];
    msq += q.mean[i] * q.mean[i];
  }
  return 0.5 * (fro + msq - static_cast<double>(s) - 2.0 * logd);
}

Layer Layer::make(int in_dim, int out_dim, bool last, bool propagate,
                  int num_samples, Prior prior) {
  if (in_dim < 1 || out_dim < 1)
    throw ContractViolation("layer: dims must be >= 1");
  if (propagate && in_dim != out_dim)
    throw ContractViolation("layer: propagation needs in_dim == out_dim");
  Layer l;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.last = last;
  l.propagate = propagate;
  l.num_samples = num_samples;
  l.prior = std::move(prior);
  for (int h = 0; h < out_dim; ++h)
    l.units.push_back(VariationalCoefficients::make(num_samples));
  if (!last)
    l.noise_logvar = Tensor::full({1, static_cast<std::size_t>(out_dim)}, std::log(1e-2));
  return l;
}

LayerForward layer_forward(ad::Tape& t, const Layer& layer, const LayerVars& v,
                           ad::Var input, rng::Key prior_key, rng::Key noise_key,
                           std::span<const std::int64_t> point_ids, bool draw_output) {
  using namespace ad;
  const std::size_t b = t.value(input).dim(0);
  if (t.value(input).dim(1) != static_cast<std::size_t>(layer.in_dim))
    throw ContractViolation("layer_forward: input width " +
                            std::to_string(t.value(input).dim(1)) + ", expected " +
                            std::to_string(layer.in_dim));
  if (draw_output && point_ids.size() != b)
    throw ContractViolation("layer_forward: need one point id per row");

  Var samples = sample_prior_on_tape(t, layer.prior, v.prior, input,
                                     layer.num_samples, prior_key);
  EmpiricalMomentsVars mom = empirical_moments_on_tape(t, samples);

  std::vector<Var> means, vars, outs;
  for (int h = 0; h < layer.out_dim; ++h) {
    auto hu = static_cast<std::size_t>(h);
    const UnitVars& u = v.units[hu];
    Var mean_h = add(matmul(mom.phi, u.mean), mom.mean);
    if (layer.propagate) mean_h = add(mean_h, col(input, h));
    Var l = coef_scale_on_tape(t, u, layer.num_samples);
    Var proj = matmul(mom.phi, l);
    Var var_h = reshape(sum_axis(square(proj), 1), {b, 1});
    if (!layer.last) var_h = add(var_h, exp(col(v.noise_logvar, h)));
    means.push_back(mean_h);
    vars.push_back(var_h);
    if (draw_output) {
      Tensor eps({b, 1});
      rng::Key ku = noise_key.fold(hu);
      for (std::size_t i = 0; i < b; ++i)
        eps[i] = ku.fold(static_cast<std::uint64_t>(point_ids[i])).normal(0);
      outs.push_back(add(mean_h, mul(sqrt(var_h), t.constant(std::move(eps)))));
    }
  }

  LayerForward out;
  out.mean = concat_cols(means);
  out.var = concat_cols(vars);
  if (draw_output) out.sampled = concat_cols(outs);
  out.phi = mom.phi;
  return out;
}

}  // namespace dvip
