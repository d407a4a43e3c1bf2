#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "picknet/dsp/audio.hpp"
#include "picknet/dsp/features.hpp"
#include "picknet/dsp/stft.hpp"
#include "picknet/nn/network.hpp"
#include "picknet/stream/diarize.hpp"
#include "picknet/stream/sync.hpp"

namespace picknet::stream {

enum class Smoothing { kNone, kEma };

struct StreamConfig {
  std::size_t subsample_n = 3;
  double resync_interval = 30.0;  // s
  double sync_search = 0.5;       // +- s
  double sync_window = 10.0;      // s
  std::size_t context_left = dsp::kContextLeft;
  std::size_t context_right = dsp::kContextRight;
  dsp::FeatureKind feature_kind = dsp::FeatureKind::kLogMel;
  Smoothing smoothing = Smoothing::kNone;
  double ema_alpha = 0.5;  // weight of the newest evaluation
  bool synchronize = true;

  void validate() const;
};

// y_f = sum_m p_m x_{m,f}
std::vector<dsp::Complex> enhance_frame(std::span<const double> p,
                                        const std::vector<std::span<const dsp::Complex>>& frames);

struct StreamStats {
  std::size_t frames = 0;
  std::size_t model_evaluations = 0;
  double selection_seconds = 0.0;  // model evaluation plus posterior hold/smoothing
  std::size_t resyncs = 0;
};

// Per-conversation streaming state: synchroniser, STFT framing, feature
// normalisers, held posteriors and the overlap-add tail. Frame t is processed
// as soon as frame t + context_right has been analysed.
class StreamProcessor {
 public:
  StreamProcessor(std::shared_ptr<const nn::PickNet<float>> model, std::size_t channels, StreamConfig config = {},
                  int sample_rate = dsp::kDefaultSampleRate);

  void push(const std::vector<std::span<const double>>& blocks);
  void finish();

  // Enhanced samples that can no longer change, since the last call.
  std::vector<double> pull_output();

  const PosteriorTimeline& timeline() const { return timeline_; }
  const StreamStats& stats() const { return stats_; }
  const std::vector<SyncEvent>& sync_events() const;
  std::size_t channels() const { return channels_; }

 private:
  void consume_aligned(const std::vector<std::vector<double>>& aligned);
  void analyse_available();
  void process_ready(bool final);
  void process_frame(std::size_t t, std::size_t last_frame);

  std::shared_ptr<const nn::PickNet<float>> model_;
  std::size_t channels_;
  StreamConfig cfg_;
  int sample_rate_;
  std::optional<Synchronizer> sync_;
  std::vector<double> window_;
  std::optional<dsp::MelFilterbank> mel_;
  std::vector<dsp::RunningMeanNormalizer> norms_;

  std::vector<std::vector<double>> audio_;  // aligned samples not yet framed, per channel
  std::size_t audio_base_ = 0;              // absolute index of audio_[m][0]
  std::size_t input_samples_ = 0;

  std::size_t analysed_ = 0;   // frames analysed so far
  std::size_t processed_ = 0;  // frames enhanced so far
  std::size_t feat_base_ = 0;  // frame index of features_[m].front()
  std::vector<std::deque<std::vector<double>>> features_;
  std::deque<std::vector<std::vector<dsp::Complex>>> spectra_;  // per frame, per channel

  std::vector<double> held_;
  std::vector<float> patch_buf_;
  std::vector<double> ola_;     // overlap-add accumulator starting at ola_base_
  std::size_t ola_base_ = 0;
  std::vector<double> ready_out_;
  bool finished_ = false;

  PosteriorTimeline timeline_;
  StreamStats stats_;
};

struct StreamResult {
  dsp::AudioClip enhanced;
  PosteriorTimeline timeline;
  StreamStats stats;
  std::vector<SyncEvent> sync_events;
};

// File mode: pushes the inputs block by block through a StreamProcessor.
// The enhanced clip has the length of channel 0.
StreamResult process_stream(const std::vector<dsp::AudioClip>& inputs,
                            std::shared_ptr<const nn::PickNet<float>> model, const StreamConfig& config = {},
                            std::size_t block = 4096);

}  // namespace picknet::stream
