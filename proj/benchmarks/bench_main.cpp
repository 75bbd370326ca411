// Microbenchmarks for the hot paths: prior sampling, one training step
// (objective + gradients) as batch size and prior sample count grow, and
// mixture prediction.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "dvip/model.hpp"

namespace {

dvip::Tensor random_tensor(std::uint64_t seed, dvip::Shape shape) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  dvip::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = u(g);
  return t;
}

dvip::DvipModel make_model(int input_dim, int depth, int samples,
                           std::int64_t train_size) {
  dvip::ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.depth = depth;
  cfg.num_prior_samples = samples;
  cfg.bnn.hidden = {10, 10};
  cfg.seed = 1;
  return dvip::DvipModel(cfg, train_size);
}

std::vector<std::int64_t> iota_ids(std::size_t n) {
  std::vector<std::int64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int64_t>(i);
  return ids;
}

void bm_prior_sampling(benchmark::State& state) {
  const auto samples = static_cast<int>(state.range(0));
  dvip::DvipModel model = make_model(4, 1, samples, 1000);
  dvip::Tensor x = random_tensor(2, {128, 4});
  for (auto _ : state)
    benchmark::DoNotOptimize(model.sample_prior_functions(0, x, samples));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(bm_prior_sampling)->Arg(10)->Arg(20)->Arg(40);

void bm_training_step_batch(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  dvip::DvipModel model = make_model(4, 2, 20, 1000);
  dvip::Tensor x = random_tensor(3, {b, 4});
  dvip::Tensor y = random_tensor(4, {b, 1});
  auto ids = iota_ids(b);
  std::uint64_t iter = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(model.objective_eval(x, y, ids, 1, iter++, true, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b));
}
BENCHMARK(bm_training_step_batch)->Arg(50)->Arg(100)->Arg(200)->Arg(400);

void bm_training_step_samples(benchmark::State& state) {
  const auto samples = static_cast<int>(state.range(0));
  dvip::DvipModel model = make_model(4, 2, samples, 1000);
  dvip::Tensor x = random_tensor(3, {100, 4});
  dvip::Tensor y = random_tensor(4, {100, 1});
  auto ids = iota_ids(100);
  std::uint64_t iter = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(model.objective_eval(x, y, ids, 1, iter++, true, 1));
}
BENCHMARK(bm_training_step_samples)->Arg(5)->Arg(10)->Arg(20)->Arg(40);

void bm_predict(benchmark::State& state) {
  const auto passes = static_cast<int>(state.range(0));
  dvip::DvipModel model = make_model(4, 2, 20, 1000);
  dvip::Tensor x = random_tensor(5, {200, 4});
  for (auto _ : state)
    benchmark::DoNotOptimize(model.predict(x, passes, 1));
  state.SetItemsProcessed(state.iterations() * 200 * passes);
}
BENCHMARK(bm_predict)->Arg(1)->Arg(10)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
