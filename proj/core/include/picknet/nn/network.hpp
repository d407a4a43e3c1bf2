#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "picknet/dsp/features.hpp"
#include "picknet/nn/model_config.hpp"
#include "picknet/nn/tensor.hpp"

namespace picknet::nn {

enum class Mode { kTrain, kEval };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

// p_m for one frame; sums to one.
struct ChannelPosteriors {
  std::size_t frame = 0;
  std::vector<double> p;
};

struct MapShape {
  std::size_t c = 0, h = 0, w = 0;
  std::size_t size() const { return c * h * w; }
};

enum class OpKind { kConv, kCrossChannelPool, kBatchNorm, kRelu, kMaxPool, kFlatten, kDense };

// One executable step of the compiled layer stack.
struct Op {
  OpKind kind;
  MapShape in, out;
  std::size_t layer = 0;        // index into ModelConfig::layers
  std::size_t first_param = 0;  // index into the parameter list
  std::size_t shared_maps = 0;  // kCrossChannelPool: trailing maps averaged over channels
};

// Intermediates retained by a forward pass for backward().
template <typename T>
struct ForwardCache {
  bool valid = false;
  Mode mode = Mode::kEval;
  std::uint64_t version = 0;
  std::size_t groups = 0;
  std::size_t channels = 0;
  std::vector<T> input;
  std::vector<std::vector<T>> outputs;          // per op
  std::vector<std::vector<T>> xhat;             // batch norm: normalised input
  std::vector<std::vector<double>> inv_std;     // batch norm: per map
  std::vector<std::vector<double>> batch_mean;  // batch norm, train mode
  std::vector<std::vector<double>> batch_var;   // biased
  std::vector<std::vector<std::uint32_t>> argmax;
  std::vector<T> posteriors;
};

template <typename T>
struct ForwardResult {
  std::vector<T> logits;      // groups * channels
  std::vector<T> posteriors;  // softmax within each group
  std::uint64_t macs = 0;     // multiply-accumulates actually executed
};

// Channel-shared convolutional selector with cross-channel mean pooling.
// Input is laid out as `groups` examples of `channels` patches each; the
// softmax and the cross-channel means act within an example.
template <typename T>
class PickNet {
 public:
  explicit PickNet(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<Op>& ops() const { return ops_; }
  std::size_t input_size() const { return cfg_.input_frames * cfg_.input_dim; }

  // Kaiming-uniform (fan-in) kernels and dense weights, zero biases, unit gamma.
  void initialize(std::uint64_t seed);

  const std::vector<NamedTensor<T>>& parameters() const { return params_; }
  // Any mutable access invalidates outstanding forward caches.
  std::vector<NamedTensor<T>>& mutable_parameters();
  // False for batch-norm running statistics.
  bool trainable(std::size_t index) const { return trainable_[index]; }
  std::uint64_t version() const { return version_; }

  ForwardResult<T> forward(std::span<const T> input, std::size_t groups, std::size_t channels,
                           Mode mode, ForwardCache<T>* cache = nullptr) const;

  // Gradients of a scalar loss w.r.t. every parameter, given dL/dp for each
  // posterior of the cached forward pass. Running statistics get zeros.
  std::vector<Tensor<T>> backward(const ForwardCache<T>& cache,
                                  std::span<const T> d_posteriors) const;

  // Folds the cached batch statistics into the running estimates.
  void update_running_stats(const ForwardCache<T>& cache, double momentum = kBatchNormMomentum);

  // Multiply-accumulate count of one forward over a single example with
  // `channels` channels; forward().macs reports the same quantity.
  std::uint64_t mac_count(std::size_t channels) const;

  template <typename U>
  PickNet<U> cast() const {
    PickNet<U> out(cfg_);
    auto& dst = out.mutable_parameters();
    for (std::size_t i = 0; i < params_.size(); ++i) dst[i].tensor = params_[i].tensor.template cast<U>();
    return out;
  }

 private:
  ModelConfig cfg_;
  std::vector<Op> ops_;
  std::vector<NamedTensor<T>> params_;
  std::vector<bool> trainable_;
  std::uint64_t version_ = 1;
};

// Convenience wrapper: one example of M patches.
template <typename T>
ChannelPosteriors picknet_forward(const PickNet<T>& net, std::span<const dsp::FeaturePatch> patches,
                                  Mode mode, ForwardCache<T>* cache = nullptr);

}  // namespace picknet::nn
