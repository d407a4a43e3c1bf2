#include "picknet/stream/evaluate.hpp"

#include <cmath>

#include <json.hpp>

#include "picknet/dsp/stft.hpp"
#include "picknet/error.hpp"
#include "picknet/sim/simulate.hpp"

namespace picknet::stream {

namespace {

double frame_mean_square(const dsp::AudioClip& c, std::size_t t) {
  const std::size_t start = t * dsp::kHop;
  double acc = 0.0;
  for (std::size_t i = 0; i < dsp::kWindowLength; ++i) {
    const std::size_t n = start + i;
    const double v = n < c.size() ? c.samples[n] : 0.0;
    acc += v * v;
  }
  return acc / static_cast<double>(dsp::kWindowLength);
}

}  // namespace

std::vector<bool> energy_gate(const dsp::AudioClip& clean_near, std::size_t frames, double gate_dbfs) {
  const double threshold = std::pow(10.0, gate_dbfs / 10.0);
  std::vector<bool> out(frames);
  for (std::size_t t = 0; t < frames; ++t) out[t] = frame_mean_square(clean_near, t) > threshold;
  return out;
}

std::vector<std::size_t> max_energy_labels(const std::vector<dsp::AudioClip>& noisy, std::size_t frames) {
  require(!noisy.empty(), ErrorCode::kInvalidInput, "no channels");
  std::vector<std::size_t> out(frames, 0);
  for (std::size_t t = 0; t < frames; ++t) {
    double best = frame_mean_square(noisy[0], t);
    for (std::size_t m = 1; m < noisy.size(); ++m) {
      const double e = frame_mean_square(noisy[m], t);
      if (e > best) {
        best = e;
        out[t] = m;
      }
    }
  }
  return out;
}

std::vector<std::size_t> argmax_labels(const PosteriorTimeline& tl) {
  std::vector<std::size_t> out;
  out.reserve(tl.entries.size());
  for (const auto& e : tl.entries) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < e.p.size(); ++m)
      if (e.p[m] > e.p[best]) best = m;
    out.push_back(best);
  }
  return out;
}

LabelScore score_labels(const std::vector<std::size_t>& labels, const std::vector<bool>& gate,
                        std::size_t near_index) {
  require(labels.size() == gate.size(), ErrorCode::kInvalidInput, "labels and gate differ in length");
  LabelScore s;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (!gate[t]) continue;
    ++s.gated;
    if (labels[t] == near_index) ++s.correct;
  }
  return s;
}

std::string to_json(const EvalReport& r) {
  return nlohmann::json{{"samples", r.samples},
                        {"frames", r.frames},
                        {"gated_frames", r.gated_frames},
                        {"correct", r.correct},
                        {"baseline_correct", r.baseline_correct},
                        {"accuracy", r.accuracy},
                        {"baseline_accuracy", r.baseline_accuracy},
                        {"output_snr_db", r.output_snr_db},
                        {"model_evaluations", r.model_evaluations},
                        {"selection_seconds", r.selection_seconds}}
      .dump();
}

EvalReport evaluate_manifest(const std::filesystem::path& manifest, std::shared_ptr<const nn::PickNet<float>> model,
                             const StreamConfig& config) {
  const auto records = sim::read_manifest(manifest);
  const auto dir = manifest.parent_path();
  EvalReport rep;
  double sig = 0.0, err = 0.0;
  for (const auto& rec : records) {
    const auto s = sim::load_sample(dir, rec);
    const auto res = process_stream(s.noisy, model, config);
    const std::size_t frames = res.timeline.entries.size();
    const auto gate = energy_gate(s.clean[s.near_index], frames);
    const auto model_score = score_labels(argmax_labels(res.timeline), gate, s.near_index);
    const auto base_score = score_labels(max_energy_labels(s.noisy, frames), gate, s.near_index);

    const auto target = dsp::stft(s.clean[s.near_index]);
    const auto output = dsp::stft(res.enhanced);
    const std::size_t common = std::min({frames, target.frames, output.frames});
    for (std::size_t t = 0; t < common; ++t) {
      if (!gate[t]) continue;
      for (std::size_t f = 0; f < dsp::kBins; ++f) {
        const double a = std::abs(target.at(t, f));
        const double d = std::abs(output.at(t, f)) - a;
        sig += a * a;
        err += d * d;
      }
    }
    ++rep.samples;
    rep.frames += frames;
    rep.gated_frames += model_score.gated;
    rep.correct += model_score.correct;
    rep.baseline_correct += base_score.correct;
    rep.model_evaluations += res.stats.model_evaluations;
    rep.selection_seconds += res.stats.selection_seconds;
  }
  if (rep.gated_frames > 0) {
    rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.gated_frames);
    rep.baseline_accuracy = static_cast<double>(rep.baseline_correct) / static_cast<double>(rep.gated_frames);
  }
  rep.output_snr_db = err > 0.0 ? 10.0 * std::log10(sig / err) : INFINITY;
  return rep;
}

}  // namespace picknet::stream
