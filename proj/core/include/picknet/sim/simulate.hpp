#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "picknet/dsp/audio.hpp"
#include "picknet/sim/noise.hpp"
#include "picknet/sim/room.hpp"

namespace picknet::sim {

struct SimulationOptions {
  std::size_t n_mics = 2;
  double snr_min_db = 10.0, snr_max_db = 20.0;
  // Each device applies its own input gain (think AGC): the reverberant speech
  // at every mic is brought to an RMS drawn from this range before noise.
  bool device_level_normalization = true;
  double level_min_dbfs = -30.0, level_max_dbfs = -20.0;
  bool inject_transient = true;
  SceneLimits limits;
};

struct TrainingSample {
  std::vector<dsp::AudioClip> noisy;
  std::vector<dsp::AudioClip> clean_reverb;
  std::vector<dsp::AudioClip> rirs;  // including the device gain: clean_reverb[m] = convolve(clean, rirs[m])
  std::size_t near_index = 0;
  RoomScene scene;
  std::vector<double> snr_db;
  std::vector<double> device_gain_db;
  std::optional<TransientEvent> transient;
};

// `transients` may be empty, which disables injection.
TrainingSample make_training_sample(const dsp::AudioClip& clean, std::uint64_t seed,
                                    const std::vector<dsp::AudioClip>& transients,
                                    const SimulationOptions& options = {});

// Cuts clips longer than max_seconds into consecutive pieces of at most that length.
std::vector<dsp::AudioClip> split_clip(const dsp::AudioClip& clip, double max_seconds = 10.0);

struct ManifestRecord {
  std::string id;
  std::uint64_t seed = 0;
  std::string clean_source;
  RoomScene scene;
  std::vector<double> snr_db;
  std::vector<double> device_gain_db;
  std::optional<TransientEvent> transient;
  std::size_t near_index = 0;
  int sample_rate = 16000;
  std::vector<std::string> noisy;  // paths relative to the manifest directory
  std::vector<std::string> clean;
};

std::string to_json_line(const ManifestRecord& record);
ManifestRecord manifest_record_from_json(const std::string& line);

// Reads every record and re-validates its scene; paths are resolved against
// the manifest's directory.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestRecord>& records);

struct LoadedSample {
  std::vector<dsp::AudioClip> noisy;
  std::vector<dsp::AudioClip> clean;
  std::size_t near_index = 0;
};
LoadedSample load_sample(const std::filesystem::path& manifest_dir, const ManifestRecord& record);

// Loads every *.wav directly inside dir (sorted by name), splitting long clips.
std::vector<std::pair<std::string, dsp::AudioClip>> load_clip_dir(const std::filesystem::path& dir,
                                                                  double max_seconds = 10.0);

struct DatasetSpec {
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string id_prefix = "s";
  SimulationOptions options;
};

// Generates n_samples training samples, writes WAVs under out_dir and
// out_dir/manifest.jsonl; returns the records in order.
std::vector<ManifestRecord> simulate_dataset(const std::vector<std::pair<std::string, dsp::AudioClip>>& clean,
                                             const std::vector<dsp::AudioClip>& transients,
                                             const std::filesystem::path& out_dir, const DatasetSpec& spec);

}  // namespace picknet::sim
