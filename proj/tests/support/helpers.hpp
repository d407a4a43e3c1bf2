#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "picknet/dsp/audio.hpp"
#include "picknet/dsp/features.hpp"
#include "picknet/nn/model_config.hpp"

namespace testing {

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

inline std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline picknet::dsp::AudioClip clip_of(std::vector<double> s, int sr = 16000) {
  picknet::dsp::AudioClip c;
  c.samples = std::move(s);
  c.sample_rate = sr;
  return c;
}

inline std::vector<picknet::dsp::FeaturePatch> random_patches(const picknet::nn::ModelConfig& cfg, std::size_t m,
                                                              std::uint64_t seed) {
  std::vector<picknet::dsp::FeaturePatch> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    out[i].dim = cfg.input_dim;
    out[i].values = gaussian(cfg.input_frames * cfg.input_dim, seed * 31 + i);
  }
  return out;
}

// Random batch-norm statistics and affine terms so eval-mode batch norm is not the identity.
template <typename Net>
void randomise_batch_norm(Net& net, std::uint64_t seed) {
  using T = typename std::decay_t<decltype(net.parameters()[0].tensor.data)>::value_type;
  auto& ps = net.mutable_parameters();
  std::uint64_t k = seed;
  for (auto& p : ps) {
    const bool is_var = p.name.ends_with("running_var");
    const bool is_bn = is_var || p.name.ends_with("running_mean") || p.name.ends_with("gamma") ||
                       p.name.ends_with("beta");
    if (!is_bn) continue;
    const auto r = uniform(p.tensor.size(), ++k, is_var ? 0.5 : -0.5, is_var ? 2.0 : 0.5);
    for (std::size_t i = 0; i < r.size(); ++i)
      p.tensor.data[i] = static_cast<T>(p.name.ends_with("gamma") ? 1.0 + r[i] : r[i]);
  }
}

// Small two-conv network (second layer cross-channel) on 9 x 8 patches.
inline picknet::nn::ModelConfig tiny_config(bool cross_channel = true) {
  using namespace picknet::nn;
  ModelConfig cfg;
  cfg.input_frames = 9;
  cfg.input_dim = 8;
  cfg.layers = {conv3x3(4), batch_norm(), relu(), maxpool2x2(), conv3x3(4, cross_channel, {1, 2}),
                batch_norm(), relu(), flatten(), dense(6), relu(), dense(1)};
  return cfg;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("picknet_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.c_str(), "rb");
  if (!f) return {};
  std::string s;
  char buf[65536];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) s.append(buf, n);
  std::fclose(f);
  return s;
}

}  // namespace testing
