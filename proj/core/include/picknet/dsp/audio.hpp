#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace picknet::dsp {

inline constexpr int kDefaultSampleRate = 16000;

// Mono time-domain signal. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Throws kInvalidInput when the clip violates its invariants.
void validate(const AudioClip& clip);

double mean_square(const std::vector<double>& x);
inline double rms(const std::vector<double>& x) { return std::sqrt(mean_square(x)); }

}  // namespace picknet::dsp
