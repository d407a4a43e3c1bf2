#include <benchmark/benchmark.h>

#include <random>

#include "picknet/dsp/features.hpp"
#include "picknet/dsp/stft.hpp"

namespace {

picknet::dsp::AudioClip noise(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.1);
  picknet::dsp::AudioClip c;
  c.samples.resize(n);
  for (auto& v : c.samples) v = g(rng);
  return c;
}

void BM_Stft(benchmark::State& state) {
  const auto clip = noise(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(picknet::dsp::stft(clip));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Stft)->Arg(16000)->Arg(160000);

void BM_StftRoundTrip(benchmark::State& state) {
  const auto clip = noise(160000);
  for (auto _ : state) benchmark::DoNotOptimize(picknet::dsp::istft(picknet::dsp::stft(clip)));
}
BENCHMARK(BM_StftRoundTrip);

void BM_FeatureFrontEnd(benchmark::State& state) {
  const auto spec = picknet::dsp::stft(noise(160000));
  const auto kind = state.range(0) ? picknet::dsp::FeatureKind::kLogMel : picknet::dsp::FeatureKind::kAmplitude;
  for (auto _ : state) benchmark::DoNotOptimize(picknet::dsp::extract_features(spec, kind));
}
BENCHMARK(BM_FeatureFrontEnd)->Arg(0)->Arg(1);

}  // namespace
