// Writes synthetic speech clips (and optionally transient clips) for use as a
// clean-speech directory when no corpus is at hand.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "picknet/dsp/wav.hpp"
#include "picknet/error.hpp"
#include "picknet/seed.hpp"
#include "picknet/sim/noise.hpp"
#include "picknet/sim/speech_synth.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"picknet_fixtures: synthetic speech and transient clips"};
  std::string out_dir, transient_dir;
  std::size_t n_clips = 8;
  double seconds = 10.0;
  std::uint64_t seed = 1;
  app.add_option("--out-dir", out_dir, "directory for speech clips")->required();
  app.add_option("--n-clips", n_clips, "number of speech clips");
  app.add_option("--seconds", seconds, "clip duration");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--transient-dir", transient_dir, "also write the synthetic transient clips here");
  CLI11_PARSE(app, argc, argv);

  try {
    picknet::require(n_clips > 0 && seconds > 0.0, picknet::ErrorCode::kInvalidConfig,
                     "--n-clips and --seconds must be positive");
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < n_clips; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "speech_%03zu.wav", i);
      const auto clip = picknet::sim::synthesize_speech(picknet::derive_seed(seed, i), seconds);
      picknet::dsp::write_wav(fs::path(out_dir) / name, clip);
    }
    if (!transient_dir.empty()) {
      fs::create_directories(transient_dir);
      const auto clips = picknet::sim::synthetic_transients();
      for (std::size_t i = 0; i < clips.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "transient_%02zu.wav", i);
        picknet::dsp::write_wav(fs::path(transient_dir) / name, clips[i]);
      }
    }
  } catch (const picknet::Error& e) {
    std::cerr << "picknet_fixtures: " << e.what() << "\n";
    return e.code() == picknet::ErrorCode::kInvalidConfig ? 2 : 1;
  }
  std::cout << "wrote " << n_clips << " clips to " << out_dir << "\n";
  return 0;
}
