#include "picknet/stream/diarize.hpp"

#include <cstdio>

#include <json.hpp>

#include "picknet/error.hpp"

namespace picknet::stream {

std::vector<DiarizationSegment> diarize(const PosteriorTimeline& tl, double min_dur) {
  require(!tl.entries.empty(), ErrorCode::kInvalidInput, "cannot diarize an empty timeline");
  const double step = tl.frame_step_s;

  struct Run {
    std::size_t first, last_excl, label;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < tl.entries.size(); ++i) {
    const auto& p = tl.entries[i].p;
    require(!p.empty(), ErrorCode::kInvalidInput, "timeline entry without posteriors");
    std::size_t best = 0;
    for (std::size_t m = 1; m < p.size(); ++m)
      if (p[m] > p[best]) best = m;
    const std::size_t t = tl.entries[i].t;
    if (!runs.empty() && runs.back().label == best && runs.back().last_excl == t) {
      runs.back().last_excl = t + 1;
    } else {
      runs.push_back({t, t + 1, best});
    }
  }

  auto duration = [&](const Run& r) { return static_cast<double>(r.last_excl - r.first) * step; };
  auto merge_equal = [&]() {
    std::vector<Run> out;
    for (const auto& r : runs) {
      if (!out.empty() && out.back().label == r.label && out.back().last_excl == r.first) {
        out.back().last_excl = r.last_excl;
      } else {
        out.push_back(r);
      }
    }
    runs.swap(out);
  };

  while (runs.size() > 1) {
    std::size_t shortest = runs.size();
    for (std::size_t i = 0; i < runs.size(); ++i)
      if (duration(runs[i]) < min_dur && (shortest == runs.size() || duration(runs[i]) < duration(runs[shortest])))
        shortest = i;
    if (shortest == runs.size()) break;
    const bool has_prev = shortest > 0, has_next = shortest + 1 < runs.size();
    std::size_t into;
    if (has_prev && has_next) {
      into = duration(runs[shortest + 1]) > duration(runs[shortest - 1]) ? shortest + 1 : shortest - 1;
    } else {
      into = has_prev ? shortest - 1 : shortest + 1;
    }
    runs[shortest].label = runs[into].label;
    merge_equal();
  }

  std::vector<DiarizationSegment> out;
  for (const auto& r : runs)
    out.push_back({static_cast<double>(r.first) * step, static_cast<double>(r.last_excl) * step, r.label});
  return out;
}

std::string to_rttm(const std::vector<DiarizationSegment>& segments, const std::string& id) {
  std::string out;
  char buf[256];
  for (const auto& s : segments) {
    std::snprintf(buf, sizeof(buf), "SPEAKER %s 1 %.3f %.3f <NA> <NA> dev%zu <NA> <NA>\n", id.c_str(), s.start_s,
                  s.end_s - s.start_s, s.device);
    out += buf;
  }
  return out;
}

std::string to_jsonl(const PosteriorTimeline& tl) {
  std::string out;
  for (const auto& e : tl.entries) {
    out += nlohmann::json{{"t", e.t}, {"time_s", e.time_s}, {"p", e.p}, {"evaluated", e.evaluated}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace picknet::stream
