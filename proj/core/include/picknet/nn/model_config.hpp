#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "picknet/dsp/features.hpp"

namespace picknet::nn {

enum class LayerKind { kConv3x3, kBatchNorm, kRelu, kMaxPool2x2, kFlatten, kDense };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct Fraction {
  std::size_t num = 1;
  std::size_t den = 8;

  bool operator==(const Fraction&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t units = 0;  // out_channels (conv) or out_units (dense)
  bool cross_channel = false;
  Fraction xc_fraction{};

  // Number of kernels whose maps are mean-pooled across channels.
  std::size_t cross_channel_kernels() const;

  bool operator==(const LayerSpec&) const = default;
};

// Where the cross-channel mean is taken relative to the batch norm that
// follows a cross-channel convolution.
enum class PoolPoint { kBeforeBatchNorm, kAfterBatchNorm };

struct ModelConfig {
  std::vector<LayerSpec> layers;
  std::size_t input_frames = dsp::kPatchFrames;
  std::size_t input_dim = dsp::kDefaultMelBands;
  dsp::FeatureKind feature_kind = dsp::FeatureKind::kLogMel;
  PoolPoint pool_point = PoolPoint::kBeforeBatchNorm;

  bool operator==(const ModelConfig&) const = default;
};

LayerSpec conv3x3(std::size_t out_channels, bool cross_channel = false, Fraction xc = {});
LayerSpec batch_norm();
LayerSpec relu();
LayerSpec maxpool2x2();
LayerSpec flatten();
LayerSpec dense(std::size_t out_units);

// conv(16) BN ReLU pool | conv(32, xc) BN ReLU pool | conv(32, xc) BN ReLU pool |
// flatten dense(64) ReLU dense(1)
ModelConfig default_model_config(dsp::FeatureKind kind = dsp::FeatureKind::kLogMel);

// The same stack with every cross-channel layer turned into a plain convolution.
ModelConfig without_cross_channel(ModelConfig cfg);

std::size_t feature_dim(dsp::FeatureKind kind);

// Throws kInvalidConfig describing the first violated invariant.
void validate(const ModelConfig& cfg);

std::string to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view json);

}  // namespace picknet::nn
