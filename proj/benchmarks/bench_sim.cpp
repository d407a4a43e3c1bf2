#include <benchmark/benchmark.h>

#include "picknet/sim/noise.hpp"
#include "picknet/sim/rir.hpp"
#include "picknet/sim/room.hpp"

namespace {

void BM_ImageMethodRir(benchmark::State& state) {
  // seed chosen for a mid-range T60
  const auto scene = picknet::sim::sample_room(static_cast<std::uint64_t>(state.range(0)));
  const auto len = picknet::sim::rir_length(scene);
  for (auto _ : state)
    benchmark::DoNotOptimize(picknet::sim::image_method_rir(scene, scene.speaker, scene.mics[1], len));
  state.counters["T60_ms"] = scene.t60 * 1000.0;
  state.counters["taps"] = static_cast<double>(len);
}
BENCHMARK(BM_ImageMethodRir)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Convolve(benchmark::State& state) {
  const auto scene = picknet::sim::sample_room(1);
  const auto rir = picknet::sim::image_method_rir(scene, scene.speaker, scene.mics[0], picknet::sim::rir_length(scene));
  const auto clip = picknet::sim::hoth_noise(160000, 2);
  for (auto _ : state) benchmark::DoNotOptimize(picknet::sim::convolve(clip, rir));
}
BENCHMARK(BM_Convolve)->Unit(benchmark::kMillisecond);

void BM_HothNoise(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(picknet::sim::hoth_noise(160000, 3));
}
BENCHMARK(BM_HothNoise)->Unit(benchmark::kMillisecond);

}  // namespace
