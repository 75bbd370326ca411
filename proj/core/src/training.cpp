#include "dvip/training.hpp"

#include <cmath>

#include "dvip/errors.hpp"
#include "dvip/rng.hpp"

namespace dvip {

namespace {
constexpr std::uint64_t kTagShuffle = 301;

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     std::uint64_t epoch) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  rng::Key key = rng::Key(seed).fold(kTagShuffle).fold(epoch);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = key.bits(i) % (i + 1);
    std::swap(perm[i], perm[j]);
  }
  return perm;
}
}  // namespace

AdamState make_adam_state(const std::vector<ParamRef>& params) {
  AdamState st;
  for (const ParamRef& p : params) {
    st.m.push_back(Tensor::zeros(p.tensor->shape()));
    st.v.push_back(Tensor::zeros(p.tensor->shape()));
  }
  return st;
}

void adam_step(const std::vector<ParamRef>& params, const std::vector<Tensor>& grads,
               AdamState& st, const AdamConfig& cfg) {
  if (grads.size() != params.size() || st.m.size() != params.size() ||
      st.v.size() != params.size())
    throw ContractViolation("adam_step: state/gradient arity mismatch");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].tensor;
    const Tensor& g = grads[i];
    if (!g.same_shape(p))
      throw ContractViolation("adam_step: gradient shape mismatch for '" +
                              params[i].name + "'");
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    for (std::size_t k = 0; k < p.numel(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      p[k] += cfg.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.eps);
    }
  }
}

TrainResult train(DvipModel& model, const Dataset& data, const TrainConfig& cfg,
                  AdamState* state) {
  const std::size_t n = data.size();
  if (n == 0) throw ContractViolation("train: empty dataset");
  if (data.input_dim() != static_cast<std::size_t>(model.config().input_dim))
    throw ContractViolation("train: dataset width does not match model input_dim");
  if (model.train_size() != static_cast<std::int64_t>(n))
    throw ContractViolation("train: model train_size differs from dataset size");
  if (cfg.batch_size < 1) throw ContractViolation("train: batch_size must be >= 1");
  if (cfg.iterations < 0) throw ContractViolation("train: iterations must be >= 0");

  auto params = model.parameters();
  AdamState local;
  AdamState& st = state ? *state : local;
  if (st.m.empty()) st = make_adam_state(params);

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t per_epoch = (n + batch - 1) / batch;
  const std::size_t d = data.input_dim();

  TrainResult result;
  result.objective_history.reserve(static_cast<std::size_t>(cfg.iterations));

  std::vector<std::size_t> order;
  std::uint64_t order_epoch = 0;
  bool have_order = false;

  for (std::int64_t it = cfg.start_iteration;
       it < cfg.start_iteration + cfg.iterations; ++it) {
    const auto itu = static_cast<std::uint64_t>(it);
    const std::uint64_t epoch = itu / per_epoch;
    const std::size_t slot = static_cast<std::size_t>(itu % per_epoch);
    if (!have_order || epoch != order_epoch) {
      order = epoch_order(n, cfg.seed, epoch);
      order_epoch = epoch;
      have_order = true;
    }
    const std::size_t lo = slot * batch;
    const std::size_t hi = std::min(n, lo + batch);
    const std::size_t b = hi - lo;

    Tensor bx({b, d}), by({b, 1});
    std::vector<std::int64_t> ids(b);
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t src = order[lo + i];
      for (std::size_t j = 0; j < d; ++j) bx.at(i, j) = data.x.at(src, j);
      by[i] = data.y[src];
      ids[i] = static_cast<std::int64_t>(src);
    }

    EvalResult ev;
    try {
      ev = model.objective_eval(bx, by, ids, cfg.seed, itu, true, cfg.r_train);
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(it) + ": " + e.what());
    }
    for (std::size_t i = 0; i < ev.grads.size(); ++i)
      if (!ev.grads[i].all_finite())
        throw NumericError("iteration " + std::to_string(it) +
                           ": non-finite gradient for '" + params[i].name + "'");
    adam_step(params, ev.grads, st, cfg.adam);
    result.objective_history.push_back(ev.value);
  }
  return result;
}

}  // namespace dvip
