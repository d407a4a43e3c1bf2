#include "picknet/dsp/features.hpp"

#include <algorithm>
#include <cmath>

#include "picknet/error.hpp"

namespace picknet::dsp {

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::kAmplitude ? "amplitude" : "logmel";
}

FeatureKind feature_kind_from_string(std::string_view name) {
  if (name == "amplitude") return FeatureKind::kAmplitude;
  if (name == "logmel") return FeatureKind::kLogMel;
  fail(ErrorCode::kInvalidConfig, "unknown feature kind '" + std::string(name) + "'");
}

FeatureSeq amplitude(const ComplexSpectrogram& spec) {
  FeatureSeq out;
  out.kind = FeatureKind::kAmplitude;
  out.frames = spec.frames;
  out.dim = spec.bins;
  out.data.resize(spec.data.size());
  for (std::size_t i = 0; i < spec.data.size(); ++i) out.data[i] = std::abs(spec.data[i]);
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(std::size_t n_mels, std::size_t n_bins, int sample_rate)
    : n_mels_(n_mels), n_bins_(n_bins) {
  require(n_mels >= 1, ErrorCode::kInvalidConfig, "n_mels must be at least 1");
  require(n_bins >= 2, ErrorCode::kInvalidConfig, "filterbank needs at least two bins");
  require(n_mels <= n_bins, ErrorCode::kInvalidConfig, "n_mels exceeds the number of bins");
  const double nyquist = sample_rate / 2.0;
  const double mel_hi = hz_to_mel(nyquist);
  edges_.resize(n_mels + 2);
  for (std::size_t i = 0; i < edges_.size(); ++i)
    edges_[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  edges_.front() = 0.0;
  edges_.back() = nyquist;
  centers_.assign(edges_.begin() + 1, edges_.end() - 1);

  const double bin_hz = nyquist / static_cast<double>(n_bins - 1);
  weights_.assign(n_mels * n_bins, 0.0);
  first_.assign(n_mels, n_bins);
  last_.assign(n_mels, 0);
  for (std::size_t k = 0; k < n_mels; ++k) {
    const double lo = edges_[k], mid = edges_[k + 1], hi = edges_[k + 2];
    for (std::size_t f = 0; f < n_bins; ++f) {
      const double hz = static_cast<double>(f) * bin_hz;
      double w = 0.0;
      if (hz > lo && hz <= mid) w = (hz - lo) / (mid - lo);
      else if (hz > mid && hz < hi) w = (hi - hz) / (hi - mid);
      if (w > 0.0) {
        weights_[k * n_bins + f] = w;
        first_[k] = std::min(first_[k], f);
        last_[k] = f + 1;
      }
    }
    if (first_[k] > last_[k]) first_[k] = last_[k];
  }
}

void MelFilterbank::apply(std::span<const double> amplitude, std::span<double> out) const {
  for (std::size_t k = 0; k < n_mels_; ++k) {
    double e = 0.0;
    const double* w = weights_.data() + k * n_bins_;
    for (std::size_t f = first_[k]; f < last_[k]; ++f) e += w[f] * amplitude[f] * amplitude[f];
    out[k] = std::log(std::max(e, kLogFloor));
  }
}

FeatureSeq logmel(const FeatureSeq& amp, std::size_t n_mels, int sample_rate) {
  require(amp.kind == FeatureKind::kAmplitude, ErrorCode::kInvalidInput,
          "logmel expects amplitude features");
  const MelFilterbank bank(n_mels, amp.dim, sample_rate);
  FeatureSeq out;
  out.kind = FeatureKind::kLogMel;
  out.frames = amp.frames;
  out.dim = n_mels;
  out.data.resize(amp.frames * n_mels);
  for (std::size_t t = 0; t < amp.frames; ++t) bank.apply(amp.frame(t), out.frame(t));
  return out;
}

std::size_t normalization_frames(double horizon_s, std::size_t hop, int sample_rate) {
  require(horizon_s > 0.0, ErrorCode::kInvalidConfig, "normalisation horizon must be positive");
  const double frames = horizon_s * sample_rate / static_cast<double>(hop);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frames + 1e-9)));
}

RunningMeanNormalizer::RunningMeanNormalizer(std::size_t dim, std::size_t window)
    : dim_(dim), window_(window), history_(dim * window, 0.0), sum_(dim, 0.0) {
  require(window >= 1, ErrorCode::kInvalidConfig, "normalisation window must be >= 1 frame");
}

void RunningMeanNormalizer::push(std::span<const double> in, std::span<double> out) {
  double* slot = history_.data() + (count_ % window_) * dim_;
  const bool full = count_ >= window_;
  for (std::size_t d = 0; d < dim_; ++d) {
    if (full) sum_[d] -= slot[d];
    sum_[d] += in[d];
    slot[d] = in[d];
  }
  ++count_;
  const double n = static_cast<double>(std::min(count_, window_));
  for (std::size_t d = 0; d < dim_; ++d) out[d] = in[d] - sum_[d] / n;
}

FeatureSeq running_mean_normalize(const FeatureSeq& feat, double horizon_s, std::size_t hop,
                                  int sample_rate) {
  RunningMeanNormalizer norm(feat.dim, normalization_frames(horizon_s, hop, sample_rate));
  FeatureSeq out = feat;
  for (std::size_t t = 0; t < feat.frames; ++t) norm.push(feat.frame(t), out.frame(t));
  return out;
}

template <typename T>
void stack_context_into(const FeatureSeq& feat, std::size_t t, std::span<T> out) {
  require(feat.frames > 0, ErrorCode::kInvalidInput, "cannot stack an empty feature sequence");
  require(t < feat.frames, ErrorCode::kInvalidInput, "frame index out of range");
  require(out.size() == kPatchFrames * feat.dim, ErrorCode::kInvalidInput, "patch buffer size");
  const auto last = static_cast<std::ptrdiff_t>(feat.frames) - 1;
  for (std::size_t r = 0; r < kPatchFrames; ++r) {
    const auto src = std::clamp<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>(t + r) - static_cast<std::ptrdiff_t>(kContextLeft), 0, last);
    const auto row = feat.frame(static_cast<std::size_t>(src));
    std::transform(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(r * feat.dim),
                   [](double v) { return static_cast<T>(v); });
  }
}

template void stack_context_into<float>(const FeatureSeq&, std::size_t, std::span<float>);
template void stack_context_into<double>(const FeatureSeq&, std::size_t, std::span<double>);

FeaturePatch stack_context(const FeatureSeq& feat, std::size_t t) {
  FeaturePatch patch;
  patch.center_index = t;
  patch.dim = feat.dim;
  patch.values.resize(kPatchFrames * feat.dim);
  stack_context_into<double>(feat, t, patch.values);
  return patch;
}

FeatureSeq extract_features(const ComplexSpectrogram& spec, FeatureKind kind, std::size_t n_mels) {
  FeatureSeq feat = amplitude(spec);
  if (kind == FeatureKind::kLogMel) feat = logmel(feat, n_mels, spec.sample_rate);
  return running_mean_normalize(feat, kNormalizationHorizon, spec.hop, spec.sample_rate);
}

}  // namespace picknet::dsp
