#include "picknet/sim/speech_synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "picknet/error.hpp"

namespace picknet::sim {

namespace {

constexpr double kPi = std::numbers::pi;

struct Resonator {
  double y1 = 0.0, y2 = 0.0;

  double step(double x, double freq, double bw, double fs) {
    const double r = std::exp(-kPi * bw / fs);
    const double b = 2.0 * r * std::cos(2.0 * kPi * freq / fs);
    const double c = -r * r;
    const double y = (1.0 - b - c) * x + b * y1 + c * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

// F1, F2, F3 in Hz for a handful of vowels.
constexpr std::array<std::array<double, 3>, 8> kVowels = {{
    {730, 1090, 2440}, {270, 2290, 3010}, {530, 1840, 2480}, {660, 1720, 2410},
    {570, 840, 2410},  {300, 870, 2240},  {440, 1020, 2240}, {490, 1350, 1690},
}};

}  // namespace

dsp::AudioClip synthesize_speech(std::uint64_t seed, double duration_s, int sample_rate) {
  require(duration_s > 0.0 && sample_rate > 0, ErrorCode::kInvalidInput,
          "speech duration and sample rate must be positive");
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double fs = sample_rate;
  const auto total = static_cast<std::size_t>(std::lround(duration_s * fs));
  dsp::AudioClip out;
  out.sample_rate = sample_rate;
  out.samples.assign(total, 0.0);

  const double f0_base = uni(95.0, 220.0);
  const double tract = uni(0.88, 1.15);
  std::size_t pos = static_cast<std::size_t>(uni(0.05, 0.2) * fs);
  double phase = 0.0;
  std::array<Resonator, 3> res;
  Resonator fric;

  while (pos < total) {
    const int syllables = static_cast<int>(uni(1.0, 3.999));
    for (int s = 0; s < syllables && pos < total; ++s) {
      // unvoiced onset
      if (uni(0.0, 1.0) < 0.45) {
        const auto len = static_cast<std::size_t>(uni(0.04, 0.11) * fs);
        const double centre = uni(2500.0, 6000.0);
        const double gain = uni(0.05, 0.25);
        for (std::size_t i = 0; i < len && pos < total; ++i, ++pos) {
          const double env = std::sin(kPi * static_cast<double>(i) / static_cast<double>(len));
          out.samples[pos] += gain * env * fric.step(gauss(rng), centre, 1500.0, fs) * 4.0;
        }
      }
      const auto& v0 = kVowels[static_cast<std::size_t>(uni(0.0, 7.999))];
      const auto& v1 = kVowels[static_cast<std::size_t>(uni(0.0, 7.999))];
      const auto len = static_cast<std::size_t>(uni(0.10, 0.28) * fs);
      const double f0_start = f0_base * uni(0.9, 1.25);
      const double f0_end = f0_base * uni(0.75, 1.05);
      const double loud = uni(0.5, 1.0);
      for (std::size_t i = 0; i < len && pos < total; ++i, ++pos) {
        const double a = static_cast<double>(i) / static_cast<double>(len);
        const double f0 = (f0_start + a * (f0_end - f0_start)) * (1.0 + 0.01 * gauss(rng));
        phase += f0 / fs;
        double src = 0.0;
        if (phase >= 1.0) {
          phase -= 1.0;
          src = 1.0;
        }
        src += 0.02 * gauss(rng);  // aspiration
        const double env = std::min({1.0, a / 0.15, (1.0 - a) / 0.2}) * loud;
        double y = src;
        for (int k = 0; k < 3; ++k) {
          const double f = tract * (v0[k] + a * (v1[k] - v0[k]));
          y = res[k].step(y, f, 60.0 + 40.0 * k, fs);
        }
        out.samples[pos] += env * y;
      }
    }
    pos += static_cast<std::size_t>(uni(0.06, 0.35) * fs);
  }

  // lip radiation
  double prev = 0.0;
  for (auto& v : out.samples) {
    const double cur = v;
    v = cur - 0.95 * prev;
    prev = cur;
  }
  const double r = dsp::rms(out.samples);
  if (r > 0.0)
    for (auto& v : out.samples) v *= 0.1 / r;
  return out;
}

}  // namespace picknet::sim
