#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "picknet/dsp/audio.hpp"

namespace picknet::sim {

// (centre frequency Hz, level dB) pairs, ascending in frequency.
using OctaveTable = std::vector<std::pair<double, double>>;

const OctaveTable& hoth_octave_table();

// Gaussian noise shaped by the octave table (levels interpolated linearly in
// log2 frequency, held flat beyond the ends), scaled to unit RMS.
dsp::AudioClip hoth_noise(std::size_t length, std::uint64_t seed, int sample_rate = 16000,
                          const OctaveTable& table = hoth_octave_table());

// Gain g with 10 log10(P_speech / P_{g noise}) = snr_db.
double snr_gain(const dsp::AudioClip& speech, const dsp::AudioClip& noise, double snr_db);
dsp::AudioClip mix_at_snr(const dsp::AudioClip& speech, const dsp::AudioClip& noise, double snr_db);

struct TransientEvent {
  std::size_t channel = 0;
  std::size_t onset = 0;     // samples
  std::size_t length = 0;    // samples
  double level_db = 0.0;     // relative to the channel RMS
  std::size_t clip_index = 0;  // which transient clip was used, when chosen from a set
};

inline constexpr double kTransientMinSeconds = 0.1;
inline constexpr double kTransientMaxSeconds = 0.3;
inline constexpr double kTransientLevelDb = 5.0;

// Adds a cropped, rescaled copy of noise_clip to one uniformly chosen channel.
std::vector<dsp::AudioClip> inject_transient(const std::vector<dsp::AudioClip>& clips,
                                             const dsp::AudioClip& noise_clip, std::uint64_t seed,
                                             TransientEvent* event = nullptr);

// Ten procedurally generated impulsive noises (clicks, knocks, rustles), 0.3 s each.
std::vector<dsp::AudioClip> synthetic_transients(int sample_rate = 16000);

}  // namespace picknet::sim
