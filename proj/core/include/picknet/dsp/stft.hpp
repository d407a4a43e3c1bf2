#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "picknet/dsp/audio.hpp"

namespace picknet::dsp {

inline constexpr std::size_t kWindowLength = 512;  // 32 ms at 16 kHz
inline constexpr std::size_t kHop = 256;           // 16 ms at 16 kHz
inline constexpr std::size_t kBins = kWindowLength / 2 + 1;

using Complex = std::complex<double>;

// T x F grid, row-major in time.
struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t hop = kHop;
  std::size_t win_len = kWindowLength;
  int sample_rate = kDefaultSampleRate;
  std::vector<Complex> data;

  Complex& at(std::size_t t, std::size_t f) { return data[t * bins + f]; }
  const Complex& at(std::size_t t, std::size_t f) const { return data[t * bins + f]; }
  std::span<const Complex> frame(std::size_t t) const { return {data.data() + t * bins, bins}; }
  std::span<Complex> frame(std::size_t t) { return {data.data() + t * bins, bins}; }
};

// Periodic square-root Hann window. Its square sums to one at 50% overlap, so
// the same window serves analysis and synthesis.
std::vector<double> sqrt_hann(std::size_t n);

std::size_t frame_count(std::size_t samples, std::size_t win_len, std::size_t hop);

// One analysis frame: window `segment` (win_len samples) and transform.
void analyze_frame(std::span<const double> segment, std::span<const double> window,
                   std::span<Complex> out);
// One synthesis frame: inverse transform and apply the synthesis window.
void synthesize_frame(std::span<const Complex> bins, std::span<const double> window,
                      std::span<double> out);

// Frame t covers samples [t*hop, t*hop + win_len). Requires hop == win_len/2.
ComplexSpectrogram stft(const AudioClip& clip, std::size_t win_len = kWindowLength,
                        std::size_t hop = kHop);

// Weighted overlap-add. Output length is (T-1)*hop + win_len; samples covered
// by two windows reproduce the analysed signal.
AudioClip istft(const ComplexSpectrogram& spec);

}  // namespace picknet::dsp
