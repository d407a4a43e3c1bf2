#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace picknet::train {

enum class OptimizerKind { kAdam, kSgd };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(std::string_view name);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First-order optimiser over a fixed list of parameter blocks. The block
// layout is fixed by the first step() call (or by restore()).
template <typename T>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, AdamHyper hyper = {});

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  std::uint64_t steps() const { return t_; }

  void step(const std::vector<std::span<T>>& params, const std::vector<std::span<const T>>& grads);

  // Adam moments per block (empty for SGD), for checkpointing.
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  void restore(std::uint64_t steps, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v);

 private:
  OptimizerKind kind_;
  double lr_;
  AdamHyper hyper_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace picknet::train
