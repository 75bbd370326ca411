#pragma once

#include <cstdint>
#include <vector>

#include "dvip/data.hpp"
#include "dvip/model.hpp"

namespace dvip {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m, v;  // aligned with the model's parameter order
  std::int64_t step = 0;
};

AdamState make_adam_state(const std::vector<ParamRef>& params);

// One ascent step: p += lr * mhat / (sqrt(vhat) + eps), with the usual
// bias-corrected first and second moments.
void adam_step(const std::vector<ParamRef>& params, const std::vector<Tensor>& grads,
               AdamState& st, const AdamConfig& cfg);

struct TrainConfig {
  int iterations = 1000;
  int batch_size = 100;
  int r_train = 1;
  std::uint64_t seed = 0;
  AdamConfig adam;
  // First iteration index; nonzero when resuming so every stream continues
  // exactly where it left off.
  std::int64_t start_iteration = 0;
};

struct TrainResult {
  std::vector<double> objective_history;  // one entry per iteration
};

// Stochastic gradient ascent on the model's objective. Batches walk a
// per-epoch shuffled order keyed by (seed, epoch); draws inside an iteration
// are keyed by (seed, iteration), so a resumed run reproduces an unbroken one
// bit for bit. A non-finite objective or gradient aborts with the iteration
// index and offending component in the message.
TrainResult train(DvipModel& model, const Dataset& data, const TrainConfig& cfg,
                  AdamState* state = nullptr);

}  // namespace dvip
