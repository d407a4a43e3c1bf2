#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "picknet/dsp/stft.hpp"

namespace picknet::dsp {

enum class FeatureKind { kAmplitude, kLogMel };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view name);

inline constexpr std::size_t kDefaultMelBands = 80;
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kNormalizationHorizon = 4.0;  // seconds

// Past and future context around the centre frame of a patch.
inline constexpr std::size_t kContextLeft = 36;
inline constexpr std::size_t kContextRight = 4;
inline constexpr std::size_t kPatchFrames = kContextLeft + 1 + kContextRight;

// T x D grid, row-major in time.
struct FeatureSeq {
  FeatureKind kind = FeatureKind::kAmplitude;
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  std::span<const double> frame(std::size_t t) const { return {data.data() + t * dim, dim}; }
  std::span<double> frame(std::size_t t) { return {data.data() + t * dim, dim}; }
};

// kPatchFrames x D model input for one channel; row kContextLeft is the centre.
struct FeaturePatch {
  std::size_t center_index = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const { return {values.data() + r * dim, dim}; }
};

FeatureSeq amplitude(const ComplexSpectrogram& spec);

// Triangular filters on the HTK mel scale spanning 0 Hz to Nyquist.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t n_mels, std::size_t n_bins, int sample_rate);

  std::size_t bands() const { return n_mels_; }
  std::size_t bins() const { return n_bins_; }
  // Centre frequency (Hz) of each filter.
  const std::vector<double>& centers() const { return centers_; }
  // Filter edges in Hz; filter k spans [edges[k], edges[k+2]].
  const std::vector<double>& edges() const { return edges_; }
  double weight(std::size_t band, std::size_t bin) const { return weights_[band * n_bins_ + bin]; }

  // log(max(sum_f w_kf |a_f|^2, floor)) for one amplitude frame.
  void apply(std::span<const double> amplitude, std::span<double> out) const;

 private:
  std::size_t n_mels_;
  std::size_t n_bins_;
  std::vector<double> centers_;
  std::vector<double> edges_;
  std::vector<double> weights_;
  std::vector<std::size_t> first_, last_;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

FeatureSeq logmel(const FeatureSeq& amp, std::size_t n_mels = kDefaultMelBands,
                  int sample_rate = kDefaultSampleRate);

std::size_t normalization_frames(double horizon_s, std::size_t hop, int sample_rate);

// Causal per-dimension mean subtraction over the last `window` frames. At the
// start of a stream the mean covers the frames seen so far.
class RunningMeanNormalizer {
 public:
  RunningMeanNormalizer(std::size_t dim, std::size_t window);

  void push(std::span<const double> in, std::span<double> out);
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  std::size_t window_;
  std::size_t count_ = 0;
  std::vector<double> history_;  // ring of window_ frames
  std::vector<double> sum_;
};

FeatureSeq running_mean_normalize(const FeatureSeq& feat, double horizon_s = kNormalizationHorizon,
                                  std::size_t hop = kHop, int sample_rate = kDefaultSampleRate);

// Frames t-36 .. t+4, replicating the nearest valid frame beyond either end.
FeaturePatch stack_context(const FeatureSeq& feat, std::size_t t);

template <typename T>
void stack_context_into(const FeatureSeq& feat, std::size_t t, std::span<T> out);

// Full front end used by training and evaluation: STFT -> amplitude or
// log-mel -> running mean normalisation.
FeatureSeq extract_features(const ComplexSpectrogram& spec, FeatureKind kind,
                            std::size_t n_mels = kDefaultMelBands);

}  // namespace picknet::dsp
