#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace picknet::stream {

struct TimelineEntry {
  std::size_t t = 0;
  double time_s = 0.0;
  std::vector<double> p;
  bool evaluated = false;
};

struct PosteriorTimeline {
  double frame_step_s = 0.016;
  std::vector<TimelineEntry> entries;
};

struct DiarizationSegment {
  double start_s = 0.0;
  double end_s = 0.0;
  std::size_t device = 0;
};

// Frame-wise argmax (ties to the lowest index), adjacent equal labels merged,
// then segments shorter than min_dur folded into their longer neighbour.
std::vector<DiarizationSegment> diarize(const PosteriorTimeline& timeline, double min_dur = 0.2);

// "SPEAKER <id> 1 <start> <dur> <NA> <NA> dev<m> <NA> <NA>" per segment.
std::string to_rttm(const std::vector<DiarizationSegment>& segments, const std::string& recording_id);
std::string to_jsonl(const PosteriorTimeline& timeline);

}  // namespace picknet::stream
