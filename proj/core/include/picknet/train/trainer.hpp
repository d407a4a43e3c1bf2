#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>

#include "picknet/dsp/features.hpp"
#include "picknet/nn/checkpoint.hpp"
#include "picknet/nn/network.hpp"
#include "picknet/train/dataset.hpp"
#include "picknet/train/optimizer.hpp"

namespace picknet::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_frames = 64;
  std::size_t epochs = 1;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
  dsp::FeatureKind feature_kind = dsp::FeatureKind::kLogMel;
  std::string data_manifest;

  void validate() const;
};

std::string to_json(const TrainConfig& config);

// One optimisation step on a batch of frames; returns the batch mean loss.
// Throws kTrainingDiverged on a non-finite loss.
template <typename T>
double train_step(nn::PickNet<T>& net, Optimizer<T>& opt, const FrameDataset& data,
                  std::span<const std::size_t> batch);
template <typename T>
double train_step(nn::PickNet<T>& net, Optimizer<T>& opt, std::span<const FrameExample> batch);

struct StepLog {
  std::uint64_t step = 0;
  double mean_loss = 0.0;
  double learning_rate = 0.0;
  double wall_ms = 0.0;
};

std::string to_json_line(const StepLog& entry);

class Trainer {
 public:
  Trainer(TrainConfig config, nn::ModelConfig model);
  // Continues from a checkpoint written by save(); `config` may raise epochs.
  static Trainer resume(TrainConfig config, const std::filesystem::path& checkpoint);

  // Trains up to config().epochs epochs. Each step is reported to on_step;
  // on_epoch runs after every completed epoch.
  void run(const FrameDataset& data, const std::function<void(const StepLog&)>& on_step = {},
           const std::function<void(std::size_t)>& on_epoch = {});

  const TrainConfig& config() const { return config_; }
  const nn::PickNet<float>& model() const { return net_; }
  std::size_t epochs_done() const { return epochs_done_; }
  std::uint64_t steps_done() const { return steps_; }

  nn::ModelCheckpoint checkpoint() const;
  // Writes the checkpoint and, next to it, `<path>.opt` with optimiser state.
  void save(const std::filesystem::path& path) const;

 private:
  TrainConfig config_;
  nn::PickNet<float> net_;
  Optimizer<float> opt_;
  std::size_t epochs_done_ = 0;
  std::uint64_t steps_ = 0;
};

std::filesystem::path optimizer_state_path(const std::filesystem::path& checkpoint);

struct GradientCheckOptions {
  double h = 1e-5;
  // 0 checks every entry; otherwise a seeded random subset of larger tensors.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
  nn::Mode mode = nn::Mode::kTrain;
};

struct GradientCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t entries = 0;
  // Entries whose +-h stencil changed a ReLU or max-pool decision; these were
  // re-evaluated with a smaller step. Entries sitting exactly on a kink are
  // left out of the error and counted in `skipped`.
  std::size_t kinked = 0;
  std::size_t skipped = 0;
  std::string worst;  // "<tensor>[<index>]"
};

// Central differences of frame_loss(picknet_forward(.)) against backward().
GradientCheckReport gradient_check(const nn::PickNet<double>& net, const FrameExample& example,
                                   const GradientCheckOptions& options = {});

}  // namespace picknet::train
