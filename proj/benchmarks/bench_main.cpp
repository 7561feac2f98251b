#include <benchmark/benchmark.h>

#include <numeric>
#include <random>
#include <vector>

#include "caco/bank.hpp"
#include "caco/data.hpp"
#include "caco/encoder.hpp"
#include "caco/loss.hpp"
#include "caco/trainer.hpp"

namespace {

using namespace caco;

std::vector<UnitEmbedding> random_anchors(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<UnitEmbedding> out;
  Vector v(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& x : v) x = g(rng);
    out.push_back(normalize(v));
  }
  return out;
}

void BM_PositiveProbabilities(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const MemoryBank bank = init_bank({}, k, 16, 1);
  const auto z = random_anchors(1, 16, 2).front();
  for (auto _ : state) benchmark::DoNotOptimize(positive_probabilities(z, bank, 0.08));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k));
}
BENCHMARK(BM_PositiveProbabilities)->Arg(256)->Arg(4096)->Arg(65536);

void BM_BankGradient(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const MemoryBank bank = init_bank({}, 256, 16, 3);
  const auto anchors = random_anchors(batch, 16, 4);
  std::vector<std::size_t> pos;
  for (const auto& a : anchors) pos.push_back(assign_mpp(a, bank, 0.08));
  const AssignmentMap assignments(pos);
  for (auto _ : state) {
    benchmark::DoNotOptimize(accumulate_bank_gradient(anchors, assignments, bank, 0.08));
  }
}
BENCHMARK(BM_BankGradient)->Arg(8)->Arg(64)->Arg(256);

void BM_ForwardBackward(benchmark::State& state) {
  const std::vector<std::size_t> dims{32, 64, 64, 16};
  const EncoderParams enc = make_encoder(dims, 5);
  const auto x = random_anchors(1, 32, 6).front();
  const Vector upstream(16, 0.1);
  for (auto _ : state) {
    const ForwardResult r = forward(enc, x.coords());
    benchmark::DoNotOptimize(backward(enc, r.trace, upstream));
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_TrainStep(benchmark::State& state) {
  const Dataset data = default_benchmark();
  TrainConfig config;
  config.batch_size = static_cast<std::size_t>(state.range(0));
  config.symmetric = true;
  TrainState train = init_state(config, data.samples);
  std::vector<std::size_t> batch(config.batch_size);
  std::iota(batch.begin(), batch.end(), 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(batch, data.samples, train, config));
  }
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(64)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
