#include "picknet/stream/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "picknet/error.hpp"

namespace picknet::stream {

void StreamConfig::validate() const {
  require(subsample_n >= 1, ErrorCode::kInvalidConfig, "subsample_n must be at least 1");
  require(resync_interval > 0.0, ErrorCode::kInvalidConfig, "resync_interval must be positive");
  require(sync_search >= 0.0 && sync_window > 0.0, ErrorCode::kInvalidConfig, "invalid sync window");
  require(context_left == dsp::kContextLeft && context_right == dsp::kContextRight, ErrorCode::kInvalidConfig,
          "only a (36, 4) frame context is supported");
  require(smoothing == Smoothing::kNone || (ema_alpha > 0.0 && ema_alpha <= 1.0), ErrorCode::kInvalidConfig,
          "ema alpha must lie in (0, 1]");
}

std::vector<dsp::Complex> enhance_frame(std::span<const double> p,
                                        const std::vector<std::span<const dsp::Complex>>& frames) {
  require(!frames.empty() && p.size() == frames.size(), ErrorCode::kInvalidInput,
          "one posterior per channel frame is required");
  const std::size_t bins = frames[0].size();
  for (const auto& f : frames)
    require(f.size() == bins, ErrorCode::kInvalidInput, "channel frames differ in size");
  std::vector<dsp::Complex> y(bins);
  for (std::size_t f = 0; f < bins; ++f) {
    dsp::Complex acc = p[0] * frames[0][f];
    for (std::size_t m = 1; m < frames.size(); ++m) acc += p[m] * frames[m][f];
    y[f] = acc;
  }
  return y;
}

StreamProcessor::StreamProcessor(std::shared_ptr<const nn::PickNet<float>> model, std::size_t channels,
                                 StreamConfig config, int sample_rate)
    : model_(std::move(model)), channels_(channels), cfg_(config), sample_rate_(sample_rate) {
  require(model_ != nullptr, ErrorCode::kInvalidConfig, "no model given");
  require(channels >= 1, ErrorCode::kInvalidInput, "need at least one input stream");
  cfg_.validate();
  const auto& mc = model_->config();
  require(mc.feature_kind == cfg_.feature_kind, ErrorCode::kInvalidConfig,
          "checkpoint was trained on " + std::string(dsp::to_string(mc.feature_kind)) + " features, stream uses " +
              std::string(dsp::to_string(cfg_.feature_kind)));
  require(mc.input_frames == dsp::kPatchFrames, ErrorCode::kInvalidConfig,
          "model context length does not match the stream context");
  std::size_t dim = dsp::kBins;
  if (cfg_.feature_kind == dsp::FeatureKind::kLogMel) {
    mel_.emplace(mc.input_dim, dsp::kBins, sample_rate_);
    dim = mc.input_dim;
  }
  require(mc.input_dim == dim, ErrorCode::kInvalidConfig, "model feature dimension does not match the stream");

  if (channels_ > 1 && cfg_.synchronize) {
    SyncConfig sc;
    sc.resync_interval = cfg_.resync_interval;
    sc.search = cfg_.sync_search;
    sc.window = cfg_.sync_window;
    sc.sample_rate = sample_rate_;
    sync_.emplace(channels_, sc);
  }
  window_ = dsp::sqrt_hann(dsp::kWindowLength);
  const std::size_t horizon = dsp::normalization_frames(dsp::kNormalizationHorizon, dsp::kHop, sample_rate_);
  for (std::size_t m = 0; m < channels_; ++m) norms_.emplace_back(dim, horizon);
  audio_.resize(channels_);
  features_.resize(channels_);
  held_.assign(channels_, 1.0 / static_cast<double>(channels_));
  patch_buf_.resize(channels_ * model_->input_size());
  timeline_.frame_step_s = static_cast<double>(dsp::kHop) / sample_rate_;
}

const std::vector<SyncEvent>& StreamProcessor::sync_events() const {
  static const std::vector<SyncEvent> none;
  return sync_ ? sync_->events() : none;
}

void StreamProcessor::push(const std::vector<std::span<const double>>& blocks) {
  require(!finished_, ErrorCode::kInvalidState, "push after finish");
  require(blocks.size() == channels_, ErrorCode::kInvalidInput, "block count differs from channel count");
  if (sync_) {
    sync_->push(blocks);
    consume_aligned(sync_->pull());
  } else {
    for (const auto& b : blocks)
      require(b.size() == blocks[0].size(), ErrorCode::kInvalidInput,
              "unsynchronised blocks must have equal lengths");
    std::vector<std::vector<double>> copy;
    for (const auto& b : blocks) copy.emplace_back(b.begin(), b.end());
    consume_aligned(copy);
  }
  analyse_available();
  process_ready(false);
}

void StreamProcessor::finish() {
  if (finished_) return;
  finished_ = true;
  if (sync_) {
    sync_->finish();
    consume_aligned(sync_->pull());
  }
  analyse_available();
  process_ready(true);
  ready_out_.insert(ready_out_.end(), ola_.begin(), ola_.end());
  ola_base_ += ola_.size();
  ola_.clear();
  if (ola_base_ < input_samples_) ready_out_.resize(ready_out_.size() + (input_samples_ - ola_base_), 0.0);
  else if (ola_base_ > input_samples_) ready_out_.resize(ready_out_.size() - (ola_base_ - input_samples_));
  if (sync_) stats_.resyncs = sync_->resync_count();
}

std::vector<double> StreamProcessor::pull_output() {
  std::vector<double> out;
  out.swap(ready_out_);
  return out;
}

void StreamProcessor::consume_aligned(const std::vector<std::vector<double>>& aligned) {
  for (std::size_t m = 0; m < channels_; ++m) audio_[m].insert(audio_[m].end(), aligned[m].begin(), aligned[m].end());
  input_samples_ += aligned[0].size();
}

void StreamProcessor::analyse_available() {
  std::vector<double> amp(dsp::kBins), feat, norm;
  while (true) {
    const std::size_t start = analysed_ * dsp::kHop;
    if (audio_base_ + audio_[0].size() < start + dsp::kWindowLength) break;
    std::vector<std::vector<dsp::Complex>> spec(channels_, std::vector<dsp::Complex>(dsp::kBins));
    for (std::size_t m = 0; m < channels_; ++m) {
      const std::span<const double> seg(audio_[m].data() + (start - audio_base_), dsp::kWindowLength);
      dsp::analyze_frame(seg, window_, spec[m]);
      for (std::size_t f = 0; f < dsp::kBins; ++f) amp[f] = std::abs(spec[m][f]);
      if (mel_) {
        feat.resize(mel_->bands());
        mel_->apply(amp, feat);
      } else {
        feat = amp;
      }
      norm.resize(feat.size());
      norms_[m].push(feat, norm);
      features_[m].push_back(norm);
    }
    spectra_.push_back(std::move(spec));
    ++analysed_;
    // samples before the next frame start are no longer needed
    const std::size_t drop = analysed_ * dsp::kHop - audio_base_;
    if (drop >= 8192) {
      for (auto& a : audio_) a.erase(a.begin(), a.begin() + static_cast<long>(drop));
      audio_base_ += drop;
    }
  }
}

void StreamProcessor::process_ready(bool final) {
  while (processed_ < analysed_ && (final || processed_ + cfg_.context_right < analysed_)) {
    process_frame(processed_, analysed_ - 1);
    ++processed_;
  }
}

void StreamProcessor::process_frame(std::size_t t, std::size_t last_frame) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const bool evaluate = t % cfg_.subsample_n == 0;
  if (evaluate) {
    const std::size_t dim = model_->config().input_dim;
    const std::size_t per = model_->input_size();
    for (std::size_t m = 0; m < channels_; ++m) {
      for (std::size_t r = 0; r < dsp::kPatchFrames; ++r) {
        const auto src = std::clamp<std::ptrdiff_t>(
            static_cast<std::ptrdiff_t>(t + r) - static_cast<std::ptrdiff_t>(cfg_.context_left), 0,
            static_cast<std::ptrdiff_t>(last_frame));
        const auto& row = features_[m][static_cast<std::size_t>(src) - feat_base_];
        float* dst = patch_buf_.data() + m * per + r * dim;
        for (std::size_t d = 0; d < dim; ++d) dst[d] = static_cast<float>(row[d]);
      }
    }
    const auto fw = model_->forward(patch_buf_, 1, channels_, nn::Mode::kEval);
    ++stats_.model_evaluations;
    if (cfg_.smoothing == Smoothing::kEma && stats_.model_evaluations > 1) {
      for (std::size_t m = 0; m < channels_; ++m)
        held_[m] = cfg_.ema_alpha * fw.posteriors[m] + (1.0 - cfg_.ema_alpha) * held_[m];
    } else {
      for (std::size_t m = 0; m < channels_; ++m) held_[m] = fw.posteriors[m];
    }
  }
  stats_.selection_seconds += std::chrono::duration<double>(clock::now() - t0).count();
  ++stats_.frames;
  timeline_.entries.push_back({t, static_cast<double>(t) * timeline_.frame_step_s, held_, evaluate});

  // Eq. 1 and overlap-add
  std::vector<std::span<const dsp::Complex>> frames;
  for (std::size_t m = 0; m < channels_; ++m) frames.emplace_back(spectra_.front()[m]);
  const auto y = enhance_frame(held_, frames);
  std::vector<double> out(dsp::kWindowLength);
  dsp::synthesize_frame(y, window_, out);
  const std::size_t start = t * dsp::kHop;
  const std::size_t need = start + dsp::kWindowLength - ola_base_;
  if (ola_.size() < need) ola_.resize(need, 0.0);
  for (std::size_t i = 0; i < dsp::kWindowLength; ++i) ola_[start - ola_base_ + i] += out[i];
  // everything before the next frame's start is final
  const std::size_t final_to = start + dsp::kHop;
  const std::size_t n_final = final_to - ola_base_;
  ready_out_.insert(ready_out_.end(), ola_.begin(), ola_.begin() + static_cast<long>(n_final));
  ola_.erase(ola_.begin(), ola_.begin() + static_cast<long>(n_final));
  ola_base_ = final_to;

  spectra_.pop_front();
  // keep the left context of the next frame
  const std::size_t keep_from = t + 1 > cfg_.context_left ? t + 1 - cfg_.context_left : 0;
  while (feat_base_ < keep_from) {
    for (auto& f : features_) f.pop_front();
    ++feat_base_;
  }
}

StreamResult process_stream(const std::vector<dsp::AudioClip>& inputs,
                            std::shared_ptr<const nn::PickNet<float>> model, const StreamConfig& config,
                            std::size_t block) {
  require(!inputs.empty(), ErrorCode::kInvalidInput, "no input streams");
  require(block >= 1, ErrorCode::kInvalidConfig, "block size must be positive");
  const int sr = inputs[0].sample_rate;
  for (const auto& c : inputs) {
    dsp::validate(c);
    require(c.sample_rate == sr, ErrorCode::kInvalidInput, "input streams have different sample rates");
  }
  StreamProcessor proc(std::move(model), inputs.size(), config, sr);
  const bool synced = inputs.size() > 1 && config.synchronize;
  std::size_t longest = 0;
  for (const auto& c : inputs) longest = std::max(longest, c.size());
  if (!synced)
    for (const auto& c : inputs)
      require(c.size() == inputs[0].size(), ErrorCode::kInvalidInput,
              "unsynchronised inputs must have equal lengths");

  StreamResult res;
  res.enhanced.sample_rate = sr;
  for (std::size_t at = 0; at < longest; at += block) {
    std::vector<std::span<const double>> blocks;
    for (const auto& c : inputs) {
      const std::size_t lo = std::min(at, c.size()), hi = std::min(at + block, c.size());
      blocks.emplace_back(c.samples.data() + lo, hi - lo);
    }
    proc.push(blocks);
    const auto out = proc.pull_output();
    res.enhanced.samples.insert(res.enhanced.samples.end(), out.begin(), out.end());
  }
  proc.finish();
  const auto out = proc.pull_output();
  res.enhanced.samples.insert(res.enhanced.samples.end(), out.begin(), out.end());
  res.timeline = proc.timeline();
  res.stats = proc.stats();
  res.sync_events = proc.sync_events();
  return res;
}

}  // namespace picknet::stream
