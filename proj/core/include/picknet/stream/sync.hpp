#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "picknet/dsp/audio.hpp"

namespace picknet::stream {

// Lag (samples) maximising the mean-removed, overlap-normalised
// cross-correlation within +-max_lag. Positive: `other` lags `reference`,
// i.e. other[n] ~ reference[n - lag]. Throws kSyncFailure on silent input.
long estimate_offset(std::span<const double> reference, std::span<const double> other, long max_lag);
long estimate_offset(const dsp::AudioClip& reference, const dsp::AudioClip& other, double search_s);

struct SyncConfig {
  double resync_interval = 30.0;  // s
  double search = 0.5;            // +- s
  double window = 10.0;           // s of recent audio used per estimate; first estimate once this much exists
  std::size_t crossfade = 512;    // samples (32 ms at 16 kHz)
  int sample_rate = 16000;
};

struct SyncEvent {
  std::size_t at_sample = 0;  // reference-time sample where the estimate applies
  std::size_t channel = 0;
  long old_offset = 0;
  long new_offset = 0;
  bool failed = false;
  std::string message;
};

// Streams M channels into a common timeline with channel 0 as reference:
// aligned_m[n] = raw_m[n + offset_m], offsets re-estimated at window,
// window + interval, ... and changed with a linear crossfade.
class Synchronizer {
 public:
  Synchronizer(std::size_t channels, SyncConfig config = {});

  std::size_t channels() const { return raw_.size(); }
  // Appends raw samples; blocks may differ in length per channel.
  void push(const std::vector<std::span<const double>>& blocks);
  // No more input: everything still pending becomes available (zeros past the end of a channel).
  void finish();
  // Aligned samples produced since the last call, per channel (equal lengths).
  std::vector<std::vector<double>> pull();

  const std::vector<long>& offsets() const { return offsets_; }
  const std::vector<SyncEvent>& events() const { return events_; }
  std::size_t resync_count() const { return resyncs_; }

 private:
  struct Raw {
    std::vector<double> data;
    std::size_t base = 0;  // absolute index of data[0]
    std::size_t end() const { return base + data.size(); }
  };
  double raw_at(std::size_t m, long index) const;
  void maybe_resync();
  void emit();
  void trim();

  SyncConfig cfg_;
  std::vector<Raw> raw_;
  std::vector<long> offsets_, previous_;
  std::size_t change_at_ = 0;  // start of the latest crossfade
  bool changed_ = false;
  std::size_t next_sync_;
  std::size_t emitted_ = 0;
  bool finished_ = false;
  std::size_t resyncs_ = 0;
  std::vector<std::vector<double>> pending_;
  std::vector<SyncEvent> events_;
};

}  // namespace picknet::stream
