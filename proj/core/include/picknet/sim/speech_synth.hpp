#pragma once

#include <cstdint>

#include "picknet/dsp/audio.hpp"

namespace picknet::sim {

// Source-filter speech stand-in: a glottal pulse train through three formant
// resonators, organised into syllables and words separated by pauses, with
// fricative onsets. Scaled to RMS 0.1. Deterministic in `seed`.
dsp::AudioClip synthesize_speech(std::uint64_t seed, double duration_s, int sample_rate = 16000);

}  // namespace picknet::sim
