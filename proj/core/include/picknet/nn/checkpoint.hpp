#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "picknet/nn/model_config.hpp"
#include "picknet/nn/network.hpp"
#include "picknet/nn/tensor.hpp"

namespace picknet::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// On disk:
//   "PKNT" | u32 version | u32 len + JSON config | per tensor:
//   u32 len + name | u32 rank | u64 extents[rank] | f32 data | u32 CRC32
// All integers and floats little-endian; CRC covers every preceding byte.
struct ModelCheckpoint {
  std::uint32_t format_version = kCheckpointVersion;
  ModelConfig config;
  std::vector<NamedTensor<float>> tensors;
  // Free-form JSON object stored alongside the config (training progress).
  std::string extra_json = "{}";

  bool operator==(const ModelCheckpoint&) const = default;
};

std::vector<std::uint8_t> serialize(const ModelCheckpoint& ck);
ModelCheckpoint deserialize(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ModelCheckpoint& ck, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

// Writes/reads a plain tensor list in the same container (no config check).
void save_tensors(const std::vector<NamedTensor<float>>& tensors, const std::string& header_json,
                  const std::filesystem::path& path);
std::vector<NamedTensor<float>> load_tensors(const std::filesystem::path& path,
                                             std::string* header_json = nullptr);

template <typename T>
ModelCheckpoint make_checkpoint(const PickNet<T>& net, std::string extra_json = "{}");

template <typename T>
PickNet<T> network_from_checkpoint(const ModelCheckpoint& ck);

}  // namespace picknet::nn
