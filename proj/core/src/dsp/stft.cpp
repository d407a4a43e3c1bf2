#include "picknet/dsp/stft.hpp"

#include <cmath>
#include <numbers>

#include "picknet/dsp/fft.hpp"
#include "picknet/error.hpp"

namespace picknet::dsp {

std::vector<double> sqrt_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(n)));
  return w;
}

std::size_t frame_count(std::size_t samples, std::size_t win_len, std::size_t hop) {
  if (samples < win_len) return 0;
  return 1 + (samples - win_len) / hop;
}

void analyze_frame(std::span<const double> segment, std::span<const double> window,
                   std::span<Complex> out) {
  const std::size_t n = window.size();
  thread_local std::vector<double> buf;
  buf.resize(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = segment[i] * window[i];
  real_fft(n).forward(buf, out);
}

void synthesize_frame(std::span<const Complex> bins, std::span<const double> window,
                      std::span<double> out) {
  const std::size_t n = window.size();
  real_fft(n).inverse(bins, out);
  for (std::size_t i = 0; i < n; ++i) out[i] *= window[i];
}

ComplexSpectrogram stft(const AudioClip& clip, std::size_t win_len, std::size_t hop) {
  require(win_len >= 2 && win_len % 2 == 0, ErrorCode::kInvalidInput, "window length must be even");
  require(hop == win_len / 2, ErrorCode::kInvalidInput, "hop must be half the window length");
  require(clip.size() >= win_len, ErrorCode::kInvalidInput,
          "clip shorter than one analysis window");

  ComplexSpectrogram spec;
  spec.win_len = win_len;
  spec.hop = hop;
  spec.bins = win_len / 2 + 1;
  spec.sample_rate = clip.sample_rate;
  spec.frames = frame_count(clip.size(), win_len, hop);
  spec.data.resize(spec.frames * spec.bins);

  const auto window = sqrt_hann(win_len);
  for (std::size_t t = 0; t < spec.frames; ++t)
    analyze_frame(std::span(clip.samples).subspan(t * hop, win_len), window, spec.frame(t));
  return spec;
}

AudioClip istft(const ComplexSpectrogram& spec) {
  require(spec.win_len >= 2 && spec.win_len % 2 == 0 && spec.bins == spec.win_len / 2 + 1,
          ErrorCode::kInvalidInput, "spectrogram bins inconsistent with window length");
  require(spec.hop == spec.win_len / 2, ErrorCode::kInvalidInput,
          "hop must be half the window length");
  require(spec.data.size() == spec.frames * spec.bins, ErrorCode::kInvalidInput,
          "spectrogram data size mismatch");

  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  if (spec.frames == 0) return clip;
  clip.samples.assign((spec.frames - 1) * spec.hop + spec.win_len, 0.0);

  const auto window = sqrt_hann(spec.win_len);
  std::vector<double> frame(spec.win_len);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    synthesize_frame(spec.frame(t), window, frame);
    double* dst = clip.samples.data() + t * spec.hop;
    for (std::size_t i = 0; i < spec.win_len; ++i) dst[i] += frame[i];
  }
  return clip;
}

}  // namespace picknet::dsp
