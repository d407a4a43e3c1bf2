#include "picknet/train/dataset.hpp"

#include <cmath>

#include "picknet/dsp/stft.hpp"
#include "picknet/error.hpp"
#include "picknet/sim/simulate.hpp"

namespace picknet::train {

FrameDataset::FrameDataset(dsp::FeatureKind kind, std::size_t n_mels)
    : kind_(kind), n_mels_(n_mels), dim_(kind == dsp::FeatureKind::kAmplitude ? dsp::kBins : n_mels) {}

void FrameDataset::add_sample(const std::vector<dsp::AudioClip>& noisy,
                              const std::vector<dsp::AudioClip>& clean, std::size_t near_index) {
  require(!noisy.empty() && noisy.size() == clean.size(), ErrorCode::kInvalidInput,
          "a sample needs matching noisy and clean channel lists");
  require(near_index < noisy.size(), ErrorCode::kInvalidInput, "near_index out of range");
  require(channels_ == 0 || channels_ == noisy.size(), ErrorCode::kInvalidInput,
          "all samples of a dataset must have the same channel count");
  Sample s;
  s.near_index = near_index;
  for (std::size_t m = 0; m < noisy.size(); ++m) {
    require(noisy[m].size() == noisy[0].size() && clean[m].size() == noisy[0].size(),
            ErrorCode::kInvalidInput, "channels differ in length");
    const auto spec = dsp::stft(noisy[m]);
    s.features.push_back(dsp::extract_features(spec, kind_, n_mels_));
    const auto cspec = dsp::stft(clean[m]);
    std::vector<double> amp(cspec.data.size());
    for (std::size_t i = 0; i < amp.size(); ++i) amp[i] = std::abs(cspec.data[i]);
    s.amps.push_back(std::move(amp));
    s.frames = spec.frames;
  }
  channels_ = noisy.size();
  const auto index = static_cast<std::uint32_t>(samples_.size());
  for (std::size_t t = 0; t < s.frames; ++t) refs_.push_back({index, static_cast<std::uint32_t>(t)});
  samples_.push_back(std::move(s));
}

std::span<const double> FrameDataset::channel_amp(std::size_t i, std::size_t m) const {
  const Ref r = refs_.at(i);
  return {samples_[r.sample].amps[m].data() + r.frame * dsp::kBins, dsp::kBins};
}

std::span<const double> FrameDataset::target_amp(std::size_t i) const {
  const Ref r = refs_.at(i);
  return channel_amp(i, samples_[r.sample].near_index);
}

FrameExample FrameDataset::example(std::size_t i) const {
  const Ref r = refs_.at(i);
  const Sample& s = samples_[r.sample];
  FrameExample ex;
  for (std::size_t m = 0; m < channels_; ++m) {
    ex.patches.push_back(dsp::stack_context(s.features[m], r.frame));
    const auto a = channel_amp(i, m);
    ex.channel_amps.insert(ex.channel_amps.end(), a.begin(), a.end());
  }
  const auto t = target_amp(i);
  ex.target_amp.assign(t.begin(), t.end());
  return ex;
}

template <typename T>
void FrameDataset::gather_input(std::span<const std::size_t> idx, std::span<T> out) const {
  const std::size_t per = dsp::kPatchFrames * dim_;
  require(out.size() == idx.size() * channels_ * per, ErrorCode::kInvalidInput, "batch buffer has the wrong size");
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Ref r = refs_.at(idx[b]);
    const Sample& s = samples_[r.sample];
    for (std::size_t m = 0; m < channels_; ++m)
      dsp::stack_context_into<T>(s.features[m], r.frame, out.subspan((b * channels_ + m) * per, per));
  }
}

template void FrameDataset::gather_input<float>(std::span<const std::size_t>, std::span<float>) const;
template void FrameDataset::gather_input<double>(std::span<const std::size_t>, std::span<double>) const;

FrameDataset load_dataset(const std::filesystem::path& manifest, dsp::FeatureKind kind) {
  const auto records = sim::read_manifest(manifest);
  FrameDataset ds(kind);
  const auto dir = manifest.parent_path();
  for (const auto& r : records) {
    const auto s = sim::load_sample(dir, r);
    ds.add_sample(s.noisy, s.clean, s.near_index);
  }
  return ds;
}

}  // namespace picknet::train
