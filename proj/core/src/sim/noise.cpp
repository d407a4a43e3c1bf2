#include "picknet/sim/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "picknet/dsp/fft.hpp"
#include "picknet/error.hpp"
#include "picknet/seed.hpp"

namespace picknet::sim {

const OctaveTable& hoth_octave_table() {
  static const OctaveTable table = {
      {125.0, 30.9}, {250.0, 26.0}, {500.0, 21.1}, {1000.0, 16.2},
      {2000.0, 11.3}, {4000.0, 5.4}, {8000.0, -6.6},
  };
  return table;
}

namespace {

double table_level_db(const OctaveTable& t, double f) {
  if (f <= t.front().first) return t.front().second;
  if (f >= t.back().first) return t.back().second;
  const double lf = std::log2(f);
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (f <= t[i].first) {
      const double l0 = std::log2(t[i - 1].first), l1 = std::log2(t[i].first);
      const double a = (lf - l0) / (l1 - l0);
      return t[i - 1].second + a * (t[i].second - t[i - 1].second);
    }
  }
  return t.back().second;
}

}  // namespace

dsp::AudioClip hoth_noise(std::size_t length, std::uint64_t seed, int sample_rate,
                          const OctaveTable& table) {
  require(length > 0, ErrorCode::kInvalidInput, "noise length must be positive");
  require(!table.empty(), ErrorCode::kInvalidConfig, "empty noise spectrum table");
  for (std::size_t i = 1; i < table.size(); ++i)
    require(table[i].first > table[i - 1].first && table[i - 1].first > 0, ErrorCode::kInvalidConfig,
            "noise spectrum table must have ascending positive frequencies");

  const std::size_t n = dsp::next_pow2(std::max<std::size_t>(length, 2));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = gauss(rng);

  auto& fft = dsp::real_fft(n);
  std::vector<std::complex<double>> spec(fft.bins());
  fft.forward(x, spec);
  spec[0] = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
    spec[k] *= std::pow(10.0, table_level_db(table, f) / 20.0);
  }
  fft.inverse(spec, x);

  dsp::AudioClip out;
  out.sample_rate = sample_rate;
  out.samples.assign(x.begin(), x.begin() + static_cast<long>(length));
  const double r = dsp::rms(out.samples);
  require(r > 0.0, ErrorCode::kInvalidInput, "noise spectrum table yields silence");
  for (auto& v : out.samples) v /= r;
  return out;
}

double snr_gain(const dsp::AudioClip& speech, const dsp::AudioClip& noise, double snr_db) {
  require(speech.size() == noise.size(), ErrorCode::kInvalidInput,
          "speech and noise lengths differ");
  const double ps = dsp::mean_square(speech.samples);
  const double pn = dsp::mean_square(noise.samples);
  require(ps > 0.0, ErrorCode::kInvalidInput, "speech has zero power");
  require(pn > 0.0, ErrorCode::kInvalidInput, "noise has zero power");
  return std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
}

dsp::AudioClip mix_at_snr(const dsp::AudioClip& speech, const dsp::AudioClip& noise, double snr_db) {
  const double g = snr_gain(speech, noise, snr_db);
  dsp::AudioClip out = speech;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += g * noise.samples[i];
  return out;
}

std::vector<dsp::AudioClip> inject_transient(const std::vector<dsp::AudioClip>& clips,
                                             const dsp::AudioClip& noise_clip, std::uint64_t seed,
                                             TransientEvent* event) {
  require(!clips.empty(), ErrorCode::kInvalidInput, "no channels to inject into");
  const int sr = clips.front().sample_rate;
  const auto min_len = static_cast<std::size_t>(std::lround(kTransientMinSeconds * sr));
  const auto max_len = static_cast<std::size_t>(std::lround(kTransientMaxSeconds * sr));
  std::size_t shortest = clips.front().size();
  for (const auto& c : clips) {
    require(c.sample_rate == sr, ErrorCode::kInvalidInput, "channels have different sample rates");
    shortest = std::min(shortest, c.size());
  }
  require(shortest >= min_len, ErrorCode::kInvalidInput, "channels are shorter than 0.1 s");
  require(noise_clip.size() >= min_len, ErrorCode::kInvalidInput, "transient clip is shorter than 0.1 s");

  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  TransientEvent ev;
  ev.channel = pick(0, clips.size() - 1);
  const auto& target = clips[ev.channel];
  ev.length = pick(min_len, std::min({max_len, target.size(), noise_clip.size()}));
  ev.onset = pick(0, target.size() - ev.length);
  ev.level_db = std::uniform_real_distribution<double>(-kTransientLevelDb, kTransientLevelDb)(rng);
  std::size_t crop = pick(0, noise_clip.size() - ev.length);

  auto segment_ms = [&](std::size_t from) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ev.length; ++i) acc += noise_clip.samples[from + i] * noise_clip.samples[from + i];
    return acc / static_cast<double>(ev.length);
  };
  double seg_ms = segment_ms(crop);
  if (seg_ms <= 0.0) {
    crop = 0;
    seg_ms = segment_ms(crop);
  }
  require(seg_ms > 0.0, ErrorCode::kInvalidInput, "transient clip is silent");
  const double chan_rms = dsp::rms(target.samples);
  require(chan_rms > 0.0, ErrorCode::kInvalidInput, "target channel is silent");
  const double gain = chan_rms * std::pow(10.0, ev.level_db / 20.0) / std::sqrt(seg_ms);

  std::vector<dsp::AudioClip> out = clips;
  auto& dst = out[ev.channel].samples;
  for (std::size_t i = 0; i < ev.length; ++i) dst[ev.onset + i] += gain * noise_clip.samples[crop + i];
  if (event) *event = ev;
  return out;
}

std::vector<dsp::AudioClip> synthetic_transients(int sample_rate) {
  constexpr double kPi = std::numbers::pi;
  const auto len = static_cast<std::size_t>(std::lround(kTransientMaxSeconds * sample_rate));
  std::vector<dsp::AudioClip> out;
  for (int kind = 0; kind < 10; ++kind) {
    std::mt19937_64 rng(derive_seed(0x7a11, static_cast<std::uint64_t>(kind)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    dsp::AudioClip c;
    c.sample_rate = sample_rate;
    c.samples.assign(len, 0.0);
    const double fs = sample_rate;
    switch (kind % 5) {
      case 0: {  // click train
        const int clicks = 2 + kind / 5;
        for (int k = 0; k < clicks; ++k) {
          const std::size_t at = static_cast<std::size_t>((0.02 + 0.25 * k / clicks) * fs);
          for (std::size_t i = 0; i < 80 && at + i < len; ++i)
            c.samples[at + i] += gauss(rng) * std::exp(-static_cast<double>(i) / 12.0);
        }
        break;
      }
      case 1: {  // knock: damped low resonance
        const double f0 = kind < 5 ? 180.0 : 320.0;
        for (std::size_t i = 0; i < len; ++i) {
          const double t = i / fs;
          c.samples[i] = std::sin(2 * kPi * f0 * t) * std::exp(-t / 0.03) + 0.05 * gauss(rng) * std::exp(-t / 0.005);
        }
        break;
      }
      case 2: {  // rustle: enveloped high-passed noise
        double prev = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          const double t = i / fs;
          const double w = gauss(rng);
          const double env = std::sin(kPi * t / kTransientMaxSeconds);
          c.samples[i] = (w - 0.9 * prev) * env * (kind < 5 ? 1.0 : 0.6 + 0.4 * std::sin(2 * kPi * 23.0 * t));
          prev = w;
        }
        break;
      }
      case 3: {  // clatter: several short metallic rings
        const double freqs[] = {1250.0, 2110.0, 3320.0};
        for (int hit = 0; hit < 3; ++hit) {
          const std::size_t at = static_cast<std::size_t>((0.01 + 0.09 * hit) * fs);
          for (std::size_t i = at; i < len; ++i) {
            const double t = (i - at) / fs;
            c.samples[i] += std::sin(2 * kPi * freqs[(hit + kind) % 3] * t) * std::exp(-t / 0.02);
          }
        }
        break;
      }
      default: {  // bump: low-passed burst
        double y = 0.0;
        const double a = kind < 5 ? 0.97 : 0.93;
        for (std::size_t i = 0; i < len; ++i) {
          const double t = i / fs;
          y = a * y + (1.0 - a) * gauss(rng) * 8.0;
          c.samples[i] = y * std::exp(-t / 0.06);
        }
        break;
      }
    }
    double peak = 0.0;
    for (double v : c.samples) peak = std::max(peak, std::abs(v));
    for (auto& v : c.samples) v *= 0.5 / peak;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace picknet::sim
