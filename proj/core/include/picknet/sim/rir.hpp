#pragma once

#include <cstddef>
#include <span>

#include "picknet/dsp/audio.hpp"
#include "picknet/sim/room.hpp"

namespace picknet::sim {

inline constexpr double kSoundSpeed = 343.0;
inline constexpr int kSincHalfTaps = 40;  // 81-tap interpolator

struct RirOptions {
  double sound_speed = kSoundSpeed;
  int sample_rate = 16000;
  int max_order = -1;  // total reflection count cap; negative means unlimited
};

// Adds amplitude * (Hann-windowed sinc centred at `delay` samples) into h.
// Taps falling outside h are dropped.
void add_fractional_impulse(std::span<double> h, double delay, double amplitude);

dsp::AudioClip image_method_rir(const RoomScene& scene, const Vec3& src, const Vec3& mic,
                                std::size_t length, const RirOptions& options = {});

// Samples needed to hold the reverberant tail of `scene` for every mic.
std::size_t rir_length(const RoomScene& scene, int sample_rate = 16000);

// Full linear convolution truncated to the clip length.
dsp::AudioClip convolve(const dsp::AudioClip& clip, const dsp::AudioClip& rir);

}  // namespace picknet::sim
