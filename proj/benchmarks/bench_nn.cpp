#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "picknet/nn/gemm.hpp"
#include "picknet/nn/network.hpp"

namespace {

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

void BM_GemmNN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_floats(n * n, 1), b = random_floats(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    picknet::nn::gemm_nn(n, n, n, a.data(), n, b.data(), n, c.data(), n);
    benchmark::ClobberMemory();
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * n * n * n * state.iterations(), benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
}
BENCHMARK(BM_GemmNN)->Arg(64)->Arg(256)->Arg(512);

// One frame's forward pass for M channels, as run by the streaming engine.
void BM_ForwardFrame(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  picknet::nn::PickNet<float> net(picknet::nn::default_model_config());
  net.initialize(3);
  const auto in = random_floats(m * net.input_size(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(in, 1, m, picknet::nn::Mode::kEval));
  state.counters["MACs"] = static_cast<double>(net.mac_count(m));
}
BENCHMARK(BM_ForwardFrame)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

// Forward and backward of a 64-frame training batch.
void BM_TrainBatch(benchmark::State& state) {
  const std::size_t m = 2, batch = 64;
  picknet::nn::PickNet<float> net(picknet::nn::default_model_config());
  net.initialize(5);
  const auto in = random_floats(batch * m * net.input_size(), 6);
  const std::vector<float> dp(batch * m, 0.01f);
  picknet::nn::ForwardCache<float> cache;
  for (auto _ : state) {
    net.forward(in, batch, m, picknet::nn::Mode::kTrain, &cache);
    benchmark::DoNotOptimize(net.backward(cache, dp));
  }
}
BENCHMARK(BM_TrainBatch)->Unit(benchmark::kMillisecond);

}  // namespace
