#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "dvip/errors.hpp"
#include "dvip/layer.hpp"
#include "dvip/model.hpp"
#include "support.hpp"

using namespace dvip;

namespace {

ModelConfig base_cfg(int input_dim, int depth, int samples) {
  ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.depth = depth;
  cfg.num_prior_samples = samples;
  cfg.bnn.hidden = {3};
  cfg.seed = 11;
  return cfg;
}

// Move every trainable tensor off its symmetric initialization so gradients
// and sample paths are generic.
void randomize(DvipModel& model, std::uint64_t seed) {
  auto g = support::engine(seed);
  for (ParamRef& p : model.parameters())
    for (std::size_t i = 0; i < p.tensor->numel(); ++i)
      (*p.tensor)[i] += support::runif(g, -0.4, 0.4);
}

void collapse_variances(DvipModel& model) {
  for (ParamRef& p : model.parameters()) {
    const bool scale_like = p.name.find("coef_logdiag") != std::string::npos ||
                            p.name.find("coef_tril") != std::string::npos;
    const bool noise_like = p.name.find("layer") == 0 &&
                            p.name.find("noise_logvar") != std::string::npos;
    if (p.name.find("coef_logdiag") != std::string::npos || noise_like)
      *p.tensor = Tensor::full(p.tensor->shape(), -800.0);
    else if (scale_like)
      *p.tensor = Tensor::zeros(p.tensor->shape());
  }
}

std::vector<std::int64_t> iota_ids(std::size_t n) {
  std::vector<std::int64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int64_t>(i);
  return ids;
}

Tensor random_x(std::uint64_t seed, std::size_t b, std::size_t d) {
  auto g = support::engine(seed);
  return support::random_tensor(g, {b, d}, -2.0, 2.0);
}

Tensor random_y(std::uint64_t seed, std::size_t b) {
  auto g = support::engine(seed);
  return support::random_tensor(g, {b, 1}, -1.5, 1.5);
}

}  // namespace

TEST(model_build, width_and_propagation_rules) {
  DvipModel m3(base_cfg(5, 3, 4), 100);
  ASSERT_EQ(m3.layers().size(), 3u);
  EXPECT_EQ(m3.layers()[0].in_dim, 5);
  EXPECT_EQ(m3.layers()[0].out_dim, 5);  // min(input_dim, 30)
  EXPECT_TRUE(m3.layers()[0].propagate);
  EXPECT_TRUE(m3.layers()[1].propagate);
  EXPECT_EQ(m3.layers()[2].out_dim, 1);
  EXPECT_TRUE(m3.layers()[2].last);
  EXPECT_FALSE(m3.layers()[2].propagate);

  ModelConfig wide = base_cfg(40, 2, 4);
  EXPECT_EQ(wide.resolved_inner_width(), 30);

  ModelConfig uneven = base_cfg(3, 2, 4);
  uneven.inner_width = 7;
  DvipModel mu(uneven, 100);
  EXPECT_EQ(mu.layers()[0].out_dim, 7);
  EXPECT_FALSE(mu.layers()[0].propagate);  // widths differ, nothing to add

  ModelConfig off = base_cfg(4, 2, 4);
  off.input_propagation = false;
  DvipModel moff(off, 100);
  EXPECT_FALSE(moff.layers()[0].propagate);
}

TEST(model_build, constructor_contracts) {
  EXPECT_THROW(DvipModel(base_cfg(0, 1, 4), 10), ContractViolation);
  EXPECT_THROW(DvipModel(base_cfg(2, 0, 4), 10), ContractViolation);
  EXPECT_THROW(DvipModel(base_cfg(2, 1, 1), 10), ContractViolation);
  EXPECT_THROW(DvipModel(base_cfg(2, 1, 4), 0), ContractViolation);
  ModelConfig bad_q = base_cfg(2, 1, 4);
  bad_q.likelihood = LikelihoodKind::kProbit;
  bad_q.probit_quad_order = 1;
  EXPECT_THROW(DvipModel(bad_q, 10), ContractViolation);
  ModelConfig a = base_cfg(2, 2, 4);
  a.objective = ObjectiveKind::kAlphaEnergy;
  EXPECT_THROW(DvipModel(a, 10), ContractViolation);  // depth must be 1
  a.depth = 1;
  a.alpha = 0.0;
  EXPECT_THROW(DvipModel(a, 10), ContractViolation);
  a.alpha = 1.5;
  EXPECT_THROW(DvipModel(a, 10), ContractViolation);
  a.alpha = 0.5;
  a.likelihood = LikelihoodKind::kProbit;
  EXPECT_THROW(DvipModel(a, 10), ContractViolation);
}

TEST(model_params, names_unique_and_complete) {
  DvipModel model(base_cfg(2, 2, 4), 50);
  auto params = model.parameters();
  std::set<std::string> names;
  for (const ParamRef& p : params) {
    ASSERT_NE(p.tensor, nullptr);
    names.insert(p.name);
  }
  EXPECT_EQ(names.size(), params.size());
  EXPECT_TRUE(names.count("likelihood.noise_logvar"));
  EXPECT_TRUE(names.count("layer0.unit0.coef_mean"));
  EXPECT_TRUE(names.count("layer0.noise_logvar"));
  EXPECT_FALSE(names.count("layer1.noise_logvar"));  // output layer

  ModelConfig pc = base_cfg(2, 1, 4);
  pc.likelihood = LikelihoodKind::kProbit;
  DvipModel probit(pc, 50);
  for (const ParamRef& p : probit.parameters())
    EXPECT_EQ(p.name.find("likelihood."), std::string::npos);
}

TEST(model_objective, input_contracts) {
  DvipModel model(base_cfg(2, 1, 4), 50);
  Tensor x = random_x(1, 6, 2);
  Tensor y = random_y(2, 6);
  auto ids = iota_ids(6);
  EXPECT_THROW(model.objective_eval(random_x(1, 6, 3), y, ids, 0, 0, false),
               ContractViolation);
  EXPECT_THROW(model.objective_eval(x, random_y(2, 5), ids, 0, 0, false),
               ContractViolation);
  auto short_ids = iota_ids(4);
  EXPECT_THROW(model.objective_eval(x, y, short_ids, 0, 0, false),
               ContractViolation);
  EXPECT_THROW(model.objective_eval(x, y, ids, 0, 0, false, 0), ContractViolation);

  ModelConfig pc = base_cfg(2, 1, 4);
  pc.likelihood = LikelihoodKind::kProbit;
  DvipModel probit(pc, 50);
  Tensor bad_labels = Tensor::full({6, 1}, 0.5);
  EXPECT_THROW(probit.objective_eval(x, bad_labels, ids, 0, 0, false),
               ContractViolation);
}

TEST(model_objective, kl_term_is_zero_at_the_prior) {
  DvipModel model(base_cfg(2, 2, 5), 50);
  for (ParamRef& p : model.parameters())
    if (p.name.find("coef_logdiag") != std::string::npos)
      *p.tensor = Tensor::zeros(p.tensor->shape());
  Tensor x = random_x(3, 6, 2);
  Tensor y = random_y(4, 6);
  auto ids = iota_ids(6);
  EvalResult r = model.objective_eval(x, y, ids, 7, 0, false);
  EXPECT_EQ(r.kl_term, 0.0);
  EXPECT_EQ(model.total_kl(), 0.0);
  EXPECT_EQ(r.value, r.data_term);
}

TEST(model_objective, total_kl_matches_tape_kl_term) {
  DvipModel model(base_cfg(2, 2, 5), 50);
  randomize(model, 77);
  Tensor x = random_x(5, 4, 2);
  Tensor y = random_y(6, 4);
  auto ids = iota_ids(4);
  EvalResult r = model.objective_eval(x, y, ids, 7, 3, false);
  EXPECT_NEAR(r.kl_term, model.total_kl(), 1e-12 * (1.0 + model.total_kl()));
  EXPECT_NEAR(r.value, r.data_term - r.kl_term, 1e-12 * (1.0 + std::abs(r.value)));
}

TEST(model_objective, collapsed_variances_give_exact_gaussian_data_term) {
  const std::size_t b = 6;
  ModelConfig cfg = base_cfg(1, 1, 4);
  DvipModel model(cfg, static_cast<std::int64_t>(b));  // rescale factor 1
  collapse_variances(model);
  Tensor x = random_x(7, b, 1);
  Tensor y = random_y(8, b);
  auto ids = iota_ids(b);
  const std::uint64_t it = 5;
  EvalResult r = model.objective_eval(x, y, ids, cfg.seed, it, false);
  PriorSampleSet set = model.sample_prior_functions(0, x, cfg.num_prior_samples);
  EmpiricalMoments mom = empirical_moments(set);
  const double nv = model.likelihood_noise_var();
  double want = 0.0;
  for (std::size_t i = 0; i < b; ++i)
    want += gaussian_log_density(y[i], mom.mean[i], nv);
  EXPECT_NEAR(r.data_term, want, 1e-12 * (1.0 + std::abs(want)));
}

// With one layer the bound is available in closed form from the variational
// identity ELBO = E_q[log p(y|a)] + E_q[log p(a)] - E_q[log q(a)]; all three
// expectations reduce to explicit sums over (phi, m*, m, L).
TEST(model_objective, single_layer_bound_matches_direct_expectations) {
  const std::size_t b = 2;
  const int s = 3;
  ModelConfig cfg = base_cfg(1, 1, s);
  DvipModel model(cfg, static_cast<std::int64_t>(b));
  randomize(model, 91);
  Tensor x = random_x(9, b, 1);
  Tensor y = random_y(10, b);
  auto ids = iota_ids(b);
  const std::uint64_t it = 2;
  EvalResult r = model.objective_eval(x, y, ids, cfg.seed, it, false);

  PriorSampleSet set = model.sample_prior_functions(0, x, s);
  EmpiricalMoments mom = empirical_moments(set);
  const VariationalCoefficients& q = model.layers()[0].units[0];
  double lmat[3][3] = {};
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < i; ++j)
      lmat[i][j] = q.tril.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    lmat[i][i] = std::exp(q.logdiag[static_cast<std::size_t>(i)]);
  }
  const double nv = model.likelihood_noise_var();
  double direct = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double fmean = mom.mean[i];
    for (int k = 0; k < s; ++k)
      fmean += mom.phi.at(i, static_cast<std::size_t>(k)) *
               q.mean[static_cast<std::size_t>(k)];
    double fvar = 0.0;
    for (int c = 0; c < s; ++c) {
      double proj = 0.0;
      for (int k = c; k < s; ++k)
        proj += mom.phi.at(i, static_cast<std::size_t>(k)) * lmat[k][c];
      fvar += proj * proj;
    }
    direct += gaussian_log_density(y[i], fmean, nv) - fvar / (2.0 * nv);
  }
  double fro = 0.0, msq = 0.0, logd = 0.0;
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j <= i; ++j) fro += lmat[i][j] * lmat[i][j];
    msq += q.mean[static_cast<std::size_t>(i)] * q.mean[static_cast<std::size_t>(i)];
    logd += q.logdiag[static_cast<std::size_t>(i)];
  }
  direct += -0.5 * (fro + msq) + logd + 0.5 * s;
  EXPECT_NEAR(r.value, direct, 1e-10 * (1.0 + std::abs(direct)));
}

TEST(model_objective, data_term_matches_pathwise_monte_carlo) {
  const std::size_t b = 4;
  const int passes = 5;
  ModelConfig cfg = base_cfg(2, 2, 5);
  DvipModel model(cfg, static_cast<std::int64_t>(b));
  randomize(model, 92);
  Tensor x = random_x(11, b, 2);
  Tensor y = random_y(12, b);
  auto ids = iota_ids(b);
  const std::uint64_t seed = 31;
  EvalResult r = model.objective_eval(x, y, ids, seed, 0, false, passes);

  // forward_sample shares the pass/iteration keying with the objective, so
  // averaging brute-force draws of log N(y|f, s2) over the same passes must
  // agree up to the inner Monte Carlo error.
  const double nv = model.likelihood_noise_var();
  const int m = 200000;
  auto g = support::engine(93);
  double total = 0.0, var_total = 0.0;
  for (int p = 0; p < passes; ++p) {
    ForwardSample fs = model.forward_sample(x, seed, static_cast<std::uint64_t>(p), ids);
    for (std::size_t i = 0; i < b; ++i) {
      const double mean = fs.final_mean[i];
      const double sd = std::sqrt(fs.final_var[i]);
      std::vector<double> draws(static_cast<std::size_t>(m));
      for (int k = 0; k < m; ++k)
        draws[static_cast<std::size_t>(k)] =
            gaussian_log_density(y[i], mean + sd * support::rnorm(g), nv);
      auto [avg, se] = support::mean_se(draws);
      total += avg;
      var_total += se * se;
    }
  }
  const double oracle = total / passes;  // train_size == batch, rescale is 1
  const double oracle_se = std::sqrt(var_total) / passes;
  EXPECT_NEAR(r.data_term, oracle, 3.0 * oracle_se);
}

TEST(model_objective, gradients_match_finite_differences) {
  const std::size_t b = 8;
  ModelConfig cfg = base_cfg(2, 2, 5);
  DvipModel model(cfg, 40);
  randomize(model, 94);
  Tensor x = random_x(13, b, 2);
  Tensor y = random_y(14, b);
  auto ids = iota_ids(b);
  const std::uint64_t seed = 5, it = 9;
  EvalResult r = model.objective_eval(x, y, ids, seed, it, true);
  auto params = model.parameters();
  ASSERT_EQ(r.grads.size(), params.size());
  const double h = 1e-5;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& tens = *params[p].tensor;
    ASSERT_EQ(r.grads[p].shape(), tens.shape()) << params[p].name;
    for (std::size_t e = 0; e < tens.numel(); ++e) {
      const double keep = tens[e];
      tens[e] = keep + h;
      double up = model.objective_eval(x, y, ids, seed, it, false).value;
      tens[e] = keep - h;
      double dn = model.objective_eval(x, y, ids, seed, it, false).value;
      tens[e] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double an = r.grads[p][e];
      EXPECT_LT(std::abs(fd - an) / std::max(1.0, std::abs(an)), 1e-4)
          << params[p].name << "[" << e << "] fd=" << fd << " an=" << an;
    }
  }
}

TEST(model_objective, every_parameter_receives_gradient) {
  ModelConfig cfg = base_cfg(2, 2, 4);
  DvipModel model(cfg, 40);
  randomize(model, 95);
  Tensor x = random_x(15, 6, 2);
  Tensor y = random_y(16, 6);
  auto ids = iota_ids(6);
  EvalResult r = model.objective_eval(x, y, ids, 3, 1, true);
  auto params = model.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const bool is_tril = params[p].name.find("coef_tril") != std::string::npos;
    bool any = false;
    for (std::size_t e = 0; e < r.grads[p].numel(); ++e)
      any = any || r.grads[p][e] != 0.0;
    EXPECT_TRUE(any) << params[p].name;
    if (is_tril) {
      // Unused upper triangle and diagonal carry no gradient by construction.
      const std::size_t s = r.grads[p].dim(0);
      for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = i; j < s; ++j)
          EXPECT_EQ(r.grads[p].at(i, j), 0.0) << params[p].name;
    }
  }
}

TEST(model_objective, bitwise_deterministic_and_permutation_equivariant) {
  const std::size_t b = 8;
  ModelConfig cfg = base_cfg(2, 2, 4);
  DvipModel model(cfg, 40);
  randomize(model, 96);
  Tensor x = random_x(17, b, 2);
  Tensor y = random_y(18, b);
  auto ids = iota_ids(b);
  EvalResult r1 = model.objective_eval(x, y, ids, 9, 4, true, 2);
  EvalResult r2 = model.objective_eval(x, y, ids, 9, 4, true, 2);
  EXPECT_EQ(r1.value, r2.value);
  for (std::size_t p = 0; p < r1.grads.size(); ++p)
    for (std::size_t e = 0; e < r1.grads[p].numel(); ++e)
      EXPECT_EQ(r1.grads[p][e], r2.grads[p][e]);

  // Reversing the batch rows (with their ids) only reorders per-point terms.
  Tensor xr(x.shape()), yr(y.shape());
  std::vector<std::int64_t> idr(b);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t j = b - 1 - i;
    xr.at(i, 0) = x.at(j, 0);
    xr.at(i, 1) = x.at(j, 1);
    yr[i] = y[j];
    idr[i] = ids[j];
  }
  EvalResult rr = model.objective_eval(xr, yr, idr, 9, 4, false, 2);
  EXPECT_NEAR(rr.value, r1.value, 1e-9 * (1.0 + std::abs(r1.value)));
}

TEST(model_forward, permuting_rows_permutes_outputs_exactly) {
  const std::size_t b = 32;
  ModelConfig cfg = base_cfg(3, 2, 5);
  DvipModel model(cfg, 100);
  randomize(model, 97);
  Tensor x = random_x(19, b, 3);
  auto ids = iota_ids(b);
  ForwardSample base = model.forward_sample(x, 21, 1, ids);

  auto g = support::engine(20);
  std::vector<std::size_t> perm(b);
  for (std::size_t i = 0; i < b; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), g);
  Tensor xp({b, 3});
  std::vector<std::int64_t> idp(b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t d = 0; d < 3; ++d) xp.at(i, d) = x.at(perm[i], d);
    idp[i] = ids[perm[i]];
  }
  ForwardSample permuted = model.forward_sample(xp, 21, 1, idp);
  for (std::size_t i = 0; i < b; ++i) {
    EXPECT_EQ(permuted.final_mean[i], base.final_mean[perm[i]]);
    EXPECT_EQ(permuted.final_var[i], base.final_var[perm[i]]);
    for (std::size_t l = 0; l < base.layer_samples.size(); ++l)
      for (std::size_t h = 0; h < base.layer_samples[l].dim(1); ++h)
        EXPECT_EQ(permuted.layer_samples[l].at(i, h),
                  base.layer_samples[l].at(perm[i], h));
  }
}

TEST(model_forward, shapes_and_pass_dependence) {
  ModelConfig cfg = base_cfg(2, 3, 4);
  DvipModel model(cfg, 60);
  randomize(model, 98);
  Tensor x = random_x(22, 5, 2);
  ForwardSample a = model.forward_sample(x, 33, 0);
  ASSERT_EQ(a.layer_samples.size(), 3u);
  EXPECT_EQ(a.layer_samples[0].shape(), (Shape{5, 2}));
  EXPECT_EQ(a.layer_samples[2].shape(), (Shape{5, 1}));
  EXPECT_EQ(a.final_mean.shape(), (Shape{5, 1}));
  EXPECT_EQ(a.final_var.shape(), (Shape{5, 1}));
  ForwardSample b = model.forward_sample(x, 33, 0);
  ForwardSample c = model.forward_sample(x, 33, 1);
  bool all_eq = true, any_diff = false;
  for (std::size_t i = 0; i < 5; ++i) {
    all_eq = all_eq && a.final_mean[i] == b.final_mean[i];
    any_diff = any_diff || a.final_mean[i] != c.final_mean[i];
  }
  EXPECT_TRUE(all_eq);
  EXPECT_TRUE(any_diff);
  EXPECT_THROW(model.forward_sample(random_x(23, 5, 3), 33, 0), ContractViolation);
}

TEST(model_forward, collapsed_model_composes_layerwise) {
  ModelConfig cfg = base_cfg(2, 2, 4);
  DvipModel model(cfg, 60);
  randomize(model, 99);
  collapse_variances(model);
  const std::size_t b = 5;
  const int s = cfg.num_prior_samples;
  Tensor x = random_x(24, b, 2);
  ForwardSample fs = model.forward_sample(x, cfg.seed, 0);

  // Layer 0 by hand: unit means against the empirical moments, plus the
  // propagated input coordinate; variance is exactly zero.
  PriorSampleSet set0 = model.sample_prior_functions(0, x, s);
  EmpiricalMoments m0 = empirical_moments(set0);
  Tensor hidden({b, 2});
  for (std::size_t h = 0; h < 2; ++h) {
    const Tensor& cm = model.layers()[0].units[h].mean;
    for (std::size_t i = 0; i < b; ++i) {
      double acc = m0.mean[i] + x.at(i, h);
      for (int k = 0; k < s; ++k)
        acc += m0.phi.at(i, static_cast<std::size_t>(k)) *
               cm[static_cast<std::size_t>(k)];
      hidden.at(i, h) = acc;
    }
  }
  for (std::size_t i = 0; i < b * 2; ++i)
    EXPECT_NEAR(fs.layer_samples[0][i], hidden[i], 1e-10);

  PriorSampleSet set1 = model.sample_prior_functions(1, hidden, s);
  EmpiricalMoments m1 = empirical_moments(set1);
  const Tensor& cm1 = model.layers()[1].units[0].mean;
  for (std::size_t i = 0; i < b; ++i) {
    double acc = m1.mean[i];
    for (int k = 0; k < s; ++k)
      acc += m1.phi.at(i, static_cast<std::size_t>(k)) * cm1[static_cast<std::size_t>(k)];
    EXPECT_NEAR(fs.final_mean[i], acc, 1e-10);
    EXPECT_EQ(fs.final_var[i], 0.0);
  }
}

TEST(model_forward, single_rows_reproduce_batch_rows) {
  ModelConfig cfg = base_cfg(2, 2, 4);
  DvipModel model(cfg, 60);
  randomize(model, 100);
  const std::size_t b = 6;
  Tensor x = random_x(25, b, 2);
  auto ids = iota_ids(b);
  ForwardSample batch = model.forward_sample(x, 44, 2, ids);
  for (std::size_t i = 0; i < b; ++i) {
    Tensor row({1, 2});
    row.at(0, 0) = x.at(i, 0);
    row.at(0, 1) = x.at(i, 1);
    std::int64_t id = ids[i];
    ForwardSample one = model.forward_sample(row, 44, 2, std::span(&id, 1));
    EXPECT_NEAR(one.final_mean[0], batch.final_mean[i], 1e-12);
    EXPECT_NEAR(one.final_var[0], batch.final_var[i], 1e-12);
  }
}

TEST(model_predict, single_layer_components_are_identical) {
  ModelConfig cfg = base_cfg(2, 1, 4);
  DvipModel model(cfg, 60);
  randomize(model, 101);
  Tensor x = random_x(26, 5, 2);
  PredictiveMixture mix = model.predict(x, 8, 7);
  ASSERT_EQ(mix.means.shape(), (Shape{5, 8}));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t r = 1; r < 8; ++r) {
      EXPECT_EQ(mix.means.at(i, r), mix.means.at(i, 0));
      EXPECT_EQ(mix.vars.at(i, r), mix.vars.at(i, 0));
    }
  EXPECT_THROW(model.predict(x, 0, 7), ContractViolation);
}

TEST(model_predict, deep_components_differ_and_match_forward_sample) {
  ModelConfig cfg = base_cfg(2, 2, 4);
  DvipModel model(cfg, 60);
  randomize(model, 102);
  Tensor x = random_x(27, 4, 2);
  PredictiveMixture mix = model.predict(x, 3, 13);
  bool any_diff = false;
  for (std::size_t i = 0; i < 4; ++i)
    any_diff = any_diff || mix.means.at(i, 0) != mix.means.at(i, 1);
  EXPECT_TRUE(any_diff);
  for (std::size_t r = 0; r < 3; ++r) {
    ForwardSample fs = model.forward_sample(x, 13, r);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(mix.means.at(i, r), fs.final_mean[i]);
      EXPECT_EQ(mix.vars.at(i, r), fs.final_var[i]);
    }
  }
}

TEST(predictive_density, single_component_is_plain_gaussian) {
  PredictiveMixture mix;
  mix.means = Tensor({3, 1}, {0.2, -1.0, 0.7});
  mix.vars = Tensor({3, 1}, {0.5, 0.1, 1.2});
  Tensor y = Tensor::vec({0.0, -0.8, 2.0});
  const double nv = 0.3;
  Tensor ld = predictive_log_density(mix, y, nv);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_EQ(ld[i], gaussian_log_density(y[i], mix.means.at(i, 0),
                                          mix.vars.at(i, 0) + nv));
}

TEST(predictive_density, duplicate_components_collapse) {
  PredictiveMixture one, two;
  one.means = Tensor({2, 1}, {0.3, -0.4});
  one.vars = Tensor({2, 1}, {0.6, 0.9});
  two.means = Tensor({2, 2}, {0.3, 0.3, -0.4, -0.4});
  two.vars = Tensor({2, 2}, {0.6, 0.6, 0.9, 0.9});
  Tensor y = Tensor::vec({0.1, 0.2});
  Tensor a = predictive_log_density(one, y, 0.2);
  Tensor b = predictive_log_density(two, y, 0.2);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
  EXPECT_THROW(predictive_log_density(one, Tensor::vec({1.0}), 0.2),
               ContractViolation);
}

TEST(predictive_density, mixture_integrates_to_one) {
  ModelConfig cfg = base_cfg(1, 2, 4);
  DvipModel model(cfg, 60);
  randomize(model, 103);
  Tensor x({1, 1});
  x[0] = 0.4;
  PredictiveMixture mix = model.predict(x, 5, 3);
  const double nv = model.likelihood_noise_var();
  double lo = 1e300, hi = -1e300;
  for (std::size_t r = 0; r < 5; ++r) {
    const double sd = std::sqrt(mix.vars.at(0, r) + nv);
    lo = std::min(lo, mix.means.at(0, r) - 10.0 * sd);
    hi = std::max(hi, mix.means.at(0, r) + 10.0 * sd);
  }
  const int n = 20000;  // Simpson rule needs an even interval count
  const double step = (hi - lo) / n;
  double integral = 0.0;
  Tensor yy({1});
  for (int k = 0; k <= n; ++k) {
    yy[0] = lo + step * k;
    const double f = std::exp(predictive_log_density(mix, yy, nv)[0]);
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    integral += w * f;
  }
  integral *= step / 3.0;
  EXPECT_NEAR(integral, 1.0, 1e-6);
}

TEST(predictive_density, noise_enters_as_convolution) {
  // Adding observation noise to each component must equal convolving the
  // noiseless mixture with the noise kernel; check by direct quadrature.
  PredictiveMixture mix;
  mix.means = Tensor({1, 3}, {-0.6, 0.2, 1.1});
  mix.vars = Tensor({1, 3}, {0.4, 0.09, 0.8});
  const double nv = 0.25;
  auto latent_density = [&](double f) {
    double acc = 0.0;
    for (std::size_t r = 0; r < 3; ++r)
      acc += std::exp(gaussian_log_density(f, mix.means.at(0, r), mix.vars.at(0, r)));
    return acc / 3.0;
  };
  Tensor yy({1});
  for (double y : {-1.0, 0.0, 0.5, 1.5}) {
    const int n = 10000;
    const double lo = -8.0, hi = 9.0, step = (hi - lo) / n;
    double conv = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double f = lo + step * k;
      const double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      conv += w * latent_density(f) * std::exp(gaussian_log_density(y, f, nv));
    }
    conv *= step / 3.0;
    yy[0] = y;
    EXPECT_NEAR(std::exp(predictive_log_density(mix, yy, nv)[0]), conv, 1e-6);
  }
}

TEST(alpha_energy, alpha_one_is_marginal_likelihood) {
  const std::size_t b = 5;
  ModelConfig cfg = base_cfg(2, 1, 4);
  cfg.objective = ObjectiveKind::kAlphaEnergy;
  cfg.alpha = 1.0;
  DvipModel model(cfg, static_cast<std::int64_t>(b));
  randomize(model, 104);
  Tensor x = random_x(28, b, 2);
  Tensor y = random_y(29, b);
  auto ids = iota_ids(b);
  EvalResult r = model.objective_eval(x, y, ids, cfg.seed, 0, false);
  ForwardSample fs = model.forward_sample(x, cfg.seed, 0, ids);
  const double nv = model.likelihood_noise_var();
  double want = 0.0;
  for (std::size_t i = 0; i < b; ++i)
    want += gaussian_log_density(y[i], fs.final_mean[i], fs.final_var[i] + nv);
  EXPECT_NEAR(r.data_term, want, 1e-12 * (1.0 + std::abs(want)));
}

TEST(alpha_energy, zero_function_variance_matches_elbo_exactly) {
  const std::size_t b = 5;
  ModelConfig ecfg = base_cfg(2, 1, 4);
  DvipModel elbo(ecfg, static_cast<std::int64_t>(b));
  ModelConfig acfg = ecfg;
  acfg.objective = ObjectiveKind::kAlphaEnergy;
  acfg.alpha = 0.7;
  DvipModel energy(acfg, static_cast<std::int64_t>(b));
  randomize(elbo, 105);
  randomize(energy, 105);
  collapse_variances(elbo);
  collapse_variances(energy);
  Tensor x = random_x(30, b, 2);
  Tensor y = random_y(31, b);
  auto ids = iota_ids(b);
  EvalResult re = elbo.objective_eval(x, y, ids, ecfg.seed, 0, false);
  EvalResult ra = energy.objective_eval(x, y, ids, acfg.seed, 0, false);
  EXPECT_NEAR(ra.data_term, re.data_term, 1e-12 * (1.0 + std::abs(re.data_term)));
}

TEST(alpha_energy, small_alpha_approaches_the_bound) {
  const std::size_t b = 6;
  ModelConfig ecfg = base_cfg(2, 1, 5);
  DvipModel elbo(ecfg, static_cast<std::int64_t>(b));
  ModelConfig acfg = ecfg;
  acfg.objective = ObjectiveKind::kAlphaEnergy;
  acfg.alpha = 1e-4;
  DvipModel energy(acfg, static_cast<std::int64_t>(b));
  randomize(elbo, 106);
  randomize(energy, 106);
  Tensor x = random_x(32, b, 2);
  Tensor y = random_y(33, b);
  auto ids = iota_ids(b);
  EvalResult re = elbo.objective_eval(x, y, ids, ecfg.seed, 0, false);
  EvalResult ra = energy.objective_eval(x, y, ids, acfg.seed, 0, false);
  EXPECT_NEAR(ra.data_term, re.data_term, 1e-3 * (1.0 + std::abs(re.data_term)));
}

TEST(alpha_energy, matches_monte_carlo_log_moment) {
  const std::size_t b = 3;
  ModelConfig cfg = base_cfg(1, 1, 5);
  cfg.objective = ObjectiveKind::kAlphaEnergy;
  cfg.alpha = 0.5;
  DvipModel model(cfg, static_cast<std::int64_t>(b));
  randomize(model, 107);
  Tensor x = random_x(34, b, 1);
  Tensor y = random_y(35, b);
  auto ids = iota_ids(b);
  EvalResult r = model.objective_eval(x, y, ids, cfg.seed, 0, false);
  ForwardSample fs = model.forward_sample(x, cfg.seed, 0, ids);
  const double nv = model.likelihood_noise_var();
  const double a = cfg.alpha;
  auto g = support::engine(108);
  const int n = 1000000;
  double oracle = 0.0, se_sq = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double mean = fs.final_mean[i];
    const double sd = std::sqrt(fs.final_var[i]);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
      w[static_cast<std::size_t>(k)] =
          std::exp(a * gaussian_log_density(y[i], mean + sd * support::rnorm(g), nv));
    auto [wbar, wse] = support::mean_se(w);
    oracle += std::log(wbar) / a;
    se_sq += (wse / wbar / a) * (wse / wbar / a);  // delta method on log
  }
  EXPECT_NEAR(r.data_term, oracle, 3.0 * std::sqrt(se_sq));
}

TEST(model_objective, elbo_improves_over_full_batch_ascent) {
  // Tiny sanity run: repeated full-batch gradient steps on a 50-point toy
  // problem must raise the bound on average.
  const std::size_t n = 50;
  auto g = support::engine(109);
  Tensor x({n, 1}), y({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = support::runif(g, -2.0, 2.0);
    y[i] = std::sin(2.0 * x[i]) + 0.05 * support::rnorm(g);
  }
  ModelConfig cfg = base_cfg(1, 2, 8);
  DvipModel model(cfg, static_cast<std::int64_t>(n));
  auto ids = iota_ids(n);
  auto params = model.parameters();
  const double lr = 5e-3;
  double first = 0.0, last = 0.0;
  const int steps = 500;
  for (int it = 0; it < steps; ++it) {
    EvalResult r = model.objective_eval(x, y, ids, cfg.seed,
                                        static_cast<std::uint64_t>(it), true);
    if (it < 50) first += r.value;
    if (it >= steps - 50) last += r.value;
    for (std::size_t p = 0; p < params.size(); ++p)
      for (std::size_t e = 0; e < params[p].tensor->numel(); ++e)
        (*params[p].tensor)[e] += lr * r.grads[p][e];
  }
  EXPECT_GT(last / 50.0, first / 50.0);
}
