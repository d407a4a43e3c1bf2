#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "picknet/dsp/audio.hpp"
#include "picknet/nn/network.hpp"
#include "picknet/stream/diarize.hpp"
#include "picknet/stream/pipeline.hpp"

namespace picknet::stream {

inline constexpr double kEvalGateDbfs = -40.0;

// Frame t is active when the mean square of clean_near over
// [t*hop, t*hop + win) exceeds gate_dbfs.
std::vector<bool> energy_gate(const dsp::AudioClip& clean_near, std::size_t frames,
                              double gate_dbfs = kEvalGateDbfs);

// Per frame, the channel whose noisy frame has the highest mean square (ties to the lowest index).
std::vector<std::size_t> max_energy_labels(const std::vector<dsp::AudioClip>& noisy, std::size_t frames);

std::vector<std::size_t> argmax_labels(const PosteriorTimeline& timeline);

struct LabelScore {
  std::size_t gated = 0;
  std::size_t correct = 0;
};
LabelScore score_labels(const std::vector<std::size_t>& labels, const std::vector<bool>& gate,
                        std::size_t near_index);

struct EvalReport {
  std::size_t samples = 0;
  std::size_t frames = 0;
  std::size_t gated_frames = 0;
  std::size_t correct = 0;
  std::size_t baseline_correct = 0;
  double accuracy = 0.0;           // fraction of gated frames
  double baseline_accuracy = 0.0;  // max-energy selection
  double output_snr_db = 0.0;      // |enhanced| vs |clean near| over gated frames
  std::size_t model_evaluations = 0;
  double selection_seconds = 0.0;
};

std::string to_json(const EvalReport& report);

// Runs every manifest record through the streaming pipeline and scores it.
EvalReport evaluate_manifest(const std::filesystem::path& manifest, std::shared_ptr<const nn::PickNet<float>> model,
                             const StreamConfig& config = {});

}  // namespace picknet::stream
