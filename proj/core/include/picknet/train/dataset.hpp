#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "picknet/dsp/audio.hpp"
#include "picknet/dsp/features.hpp"

namespace picknet::train {

// One training frame: M input patches (from the noisy signals) and the clean
// reverberant amplitude spectra the loss compares against.
struct FrameExample {
  std::vector<dsp::FeaturePatch> patches;
  std::vector<double> target_amp;    // F
  std::vector<double> channel_amps;  // M x F
};

// Every frame of every added sample. Features and spectra are kept per
// utterance; patches are stacked on demand.
class FrameDataset {
 public:
  explicit FrameDataset(dsp::FeatureKind kind, std::size_t n_mels = dsp::kDefaultMelBands);

  void add_sample(const std::vector<dsp::AudioClip>& noisy, const std::vector<dsp::AudioClip>& clean,
                  std::size_t near_index);

  dsp::FeatureKind feature_kind() const { return kind_; }
  std::size_t feature_dim() const { return dim_; }
  std::size_t bins() const { return dsp::kBins; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return refs_.size(); }
  std::size_t sample_count() const { return samples_.size(); }

  FrameExample example(std::size_t i) const;
  std::span<const double> channel_amp(std::size_t i, std::size_t m) const;
  std::span<const double> target_amp(std::size_t i) const;

  // Writes the patches of frames idx[0..B) as B x M x 41 x D, row-major.
  template <typename T>
  void gather_input(std::span<const std::size_t> idx, std::span<T> out) const;

 private:
  struct Sample {
    std::vector<dsp::FeatureSeq> features;   // per channel
    std::vector<std::vector<double>> amps;   // per channel, frames x F
    std::size_t near_index = 0;
    std::size_t frames = 0;
  };
  struct Ref {
    std::uint32_t sample;
    std::uint32_t frame;
  };

  dsp::FeatureKind kind_;
  std::size_t n_mels_;
  std::size_t dim_;
  std::size_t channels_ = 0;
  std::vector<Sample> samples_;
  std::vector<Ref> refs_;
};

// Loads every record of a simulation manifest.
FrameDataset load_dataset(const std::filesystem::path& manifest, dsp::FeatureKind kind);

}  // namespace picknet::train
