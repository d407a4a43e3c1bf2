#pragma once

#include <filesystem>
#include <optional>

#include "picknet/dsp/audio.hpp"

namespace picknet::dsp {

enum class WavEncoding { kPcm16, kFloat32 };

// Reads a mono RIFF/WAVE file (16-bit PCM or 32-bit IEEE float). When
// `expected_rate` is given, a file at another rate is rejected; no resampling
// is ever done.
AudioClip read_wav(const std::filesystem::path& path,
                   std::optional<int> expected_rate = std::nullopt);

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace picknet::dsp
