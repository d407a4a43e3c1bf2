#include "picknet/nn/model_config.hpp"

#include <json.hpp>

#include "picknet/error.hpp"

namespace picknet::nn {

using nlohmann::json;

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv3x3: return "conv3x3";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool2x2: return "maxpool2x2";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (auto k : {LayerKind::kConv3x3, LayerKind::kBatchNorm, LayerKind::kRelu,
                 LayerKind::kMaxPool2x2, LayerKind::kFlatten, LayerKind::kDense})
    if (to_string(k) == name) return k;
  fail(ErrorCode::kInvalidConfig, "unknown layer kind '" + std::string(name) + "'");
}

std::size_t LayerSpec::cross_channel_kernels() const {
  if (!cross_channel || xc_fraction.den == 0) return 0;
  return units * xc_fraction.num / xc_fraction.den;
}

LayerSpec conv3x3(std::size_t out_channels, bool cross_channel, Fraction xc) {
  return {LayerKind::kConv3x3, out_channels, cross_channel, xc};
}
LayerSpec batch_norm() { return {LayerKind::kBatchNorm, 0, false, {}}; }
LayerSpec relu() { return {LayerKind::kRelu, 0, false, {}}; }
LayerSpec maxpool2x2() { return {LayerKind::kMaxPool2x2, 0, false, {}}; }
LayerSpec flatten() { return {LayerKind::kFlatten, 0, false, {}}; }
LayerSpec dense(std::size_t out_units) { return {LayerKind::kDense, out_units, false, {}}; }

std::size_t feature_dim(dsp::FeatureKind kind) {
  return kind == dsp::FeatureKind::kAmplitude ? dsp::kBins : dsp::kDefaultMelBands;
}

ModelConfig default_model_config(dsp::FeatureKind kind) {
  ModelConfig cfg;
  cfg.feature_kind = kind;
  cfg.input_frames = dsp::kPatchFrames;
  cfg.input_dim = feature_dim(kind);
  cfg.layers = {conv3x3(16),       batch_norm(), relu(), maxpool2x2(),
                conv3x3(32, true), batch_norm(), relu(), maxpool2x2(),
                conv3x3(32, true), batch_norm(), relu(), maxpool2x2(),
                flatten(),         dense(64),    relu(), dense(1)};
  return cfg;
}

ModelConfig without_cross_channel(ModelConfig cfg) {
  for (auto& l : cfg.layers) l.cross_channel = false;
  return cfg;
}

void validate(const ModelConfig& cfg) {
  require(!cfg.layers.empty(), ErrorCode::kInvalidConfig, "model has no layers");
  require(cfg.input_frames >= 1 && cfg.input_dim >= 1, ErrorCode::kInvalidConfig,
          "input shape must be positive");
  bool flat = false;
  std::size_t h = cfg.input_frames, w = cfg.input_dim;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto& l = cfg.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
    require(!l.cross_channel || l.kind == LayerKind::kConv3x3, ErrorCode::kInvalidConfig,
            where + ": cross_channel is only allowed on conv3x3");
    switch (l.kind) {
      case LayerKind::kConv3x3:
        require(!flat, ErrorCode::kInvalidConfig, where + ": convolution after flatten");
        require(l.units >= 1, ErrorCode::kInvalidConfig, where + ": needs out_channels >= 1");
        if (l.cross_channel) {
          require(l.xc_fraction.den > 0 && (l.units * l.xc_fraction.num) % l.xc_fraction.den == 0 &&
                      l.cross_channel_kernels() >= 1 && l.cross_channel_kernels() <= l.units,
                  ErrorCode::kInvalidConfig,
                  where + ": xc_fraction * out_channels must be a positive integer");
          if (cfg.pool_point == PoolPoint::kAfterBatchNorm)
            require(i + 1 < cfg.layers.size() && cfg.layers[i + 1].kind == LayerKind::kBatchNorm,
                    ErrorCode::kInvalidConfig,
                    where + ": pooling after batch norm needs a batchnorm layer next");
        }
        break;
      case LayerKind::kMaxPool2x2:
        require(!flat, ErrorCode::kInvalidConfig, where + ": pooling after flatten");
        h /= 2;
        w /= 2;
        require(h >= 1 && w >= 1, ErrorCode::kInvalidConfig, where + ": feature map vanished");
        break;
      case LayerKind::kFlatten:
        flat = true;
        break;
      case LayerKind::kDense:
        require(flat, ErrorCode::kInvalidConfig, where + ": dense layers must follow flatten");
        require(l.units >= 1, ErrorCode::kInvalidConfig, where + ": needs out_units >= 1");
        break;
      case LayerKind::kBatchNorm:
      case LayerKind::kRelu:
        break;
    }
  }
  const auto& last = cfg.layers.back();
  require(last.kind == LayerKind::kDense && last.units == 1, ErrorCode::kInvalidConfig,
          "final layer must be dense with one output unit");
}

std::string to_json(const ModelConfig& cfg) {
  json layers = json::array();
  for (const auto& l : cfg.layers) {
    json j = {{"kind", to_string(l.kind)}};
    if (l.kind == LayerKind::kConv3x3) j["out_channels"] = l.units;
    if (l.kind == LayerKind::kDense) j["out_units"] = l.units;
    if (l.kind == LayerKind::kConv3x3) {
      j["cross_channel"] = l.cross_channel;
      j["xc_fraction"] = {l.xc_fraction.num, l.xc_fraction.den};
    }
    layers.push_back(std::move(j));
  }
  json j = {
      {"input_shape", {cfg.input_frames, cfg.input_dim}},
      {"feature_kind", dsp::to_string(cfg.feature_kind)},
      {"pool_point", cfg.pool_point == PoolPoint::kBeforeBatchNorm ? "before_bn" : "after_bn"},
      {"layers", std::move(layers)},
  };
  return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  ModelConfig cfg;
  try {
    const json j = json::parse(text);
    cfg.input_frames = j.at("input_shape").at(0).get<std::size_t>();
    cfg.input_dim = j.at("input_shape").at(1).get<std::size_t>();
    cfg.feature_kind = dsp::feature_kind_from_string(j.at("feature_kind").get<std::string>());
    const auto pp = j.value("pool_point", std::string("before_bn"));
    require(pp == "before_bn" || pp == "after_bn", ErrorCode::kInvalidConfig,
            "unknown pool_point '" + pp + "'");
    cfg.pool_point = pp == "before_bn" ? PoolPoint::kBeforeBatchNorm : PoolPoint::kAfterBatchNorm;
    for (const auto& lj : j.at("layers")) {
      LayerSpec l;
      l.kind = layer_kind_from_string(lj.at("kind").get<std::string>());
      if (l.kind == LayerKind::kConv3x3) {
        l.units = lj.at("out_channels").get<std::size_t>();
        l.cross_channel = lj.value("cross_channel", false);
        if (lj.contains("xc_fraction"))
          l.xc_fraction = {lj["xc_fraction"].at(0).get<std::size_t>(),
                           lj["xc_fraction"].at(1).get<std::size_t>()};
      } else if (l.kind == LayerKind::kDense) {
        l.units = lj.at("out_units").get<std::size_t>();
      }
      cfg.layers.push_back(l);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidConfig, std::string("malformed model config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

}  // namespace picknet::nn
