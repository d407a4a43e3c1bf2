#include "picknet/train/optimizer.hpp"

#include <cmath>
#include <string>

#include "picknet/error.hpp"

namespace picknet::train {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind optimizer_kind_from_string(std::string_view name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  fail(ErrorCode::kInvalidConfig, "unknown optimizer '" + std::string(name) + "' (expected adam or sgd)");
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerKind kind, double learning_rate, AdamHyper hyper)
    : kind_(kind), lr_(learning_rate), hyper_(hyper) {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::kInvalidConfig,
          "learning rate must be positive");
}

template <typename T>
void Optimizer<T>::step(const std::vector<std::span<T>>& params,
                        const std::vector<std::span<const T>>& grads) {
  require(params.size() == grads.size(), ErrorCode::kInvalidInput, "parameter/gradient block count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    require(params[i].size() == grads[i].size(), ErrorCode::kInvalidInput,
            "parameter/gradient block size mismatch");
  ++t_;
  if (kind_ == OptimizerKind::kSgd) {
    const T lr = static_cast<T>(lr_);
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < params[i].size(); ++j) params[i][j] -= lr * grads[i][j];
    return;
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), T(0));
      v_.emplace_back(p.size(), T(0));
    }
  }
  require(m_.size() == params.size(), ErrorCode::kInvalidState, "optimizer block layout changed");
  const double b1 = hyper_.beta1, b2 = hyper_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const T step = static_cast<T>(lr_ / c1);
  const T root_c2 = static_cast<T>(std::sqrt(c2));
  const T eps = static_cast<T>(hyper_.eps);
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(m_[i].size() == params[i].size(), ErrorCode::kInvalidState, "optimizer block layout changed");
    T* m = m_[i].data();
    T* v = v_[i].data();
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const T g = grads[i][j];
      m[j] = tb1 * m[j] + (T(1) - tb1) * g;
      v[j] = tb2 * v[j] + (T(1) - tb2) * g * g;
      // lr * mhat / (sqrt(vhat) + eps), with the bias corrections folded in
      params[i][j] -= step * m[j] / (std::sqrt(v[j]) / root_c2 + eps);
    }
  }
}

template <typename T>
void Optimizer<T>::restore(std::uint64_t steps, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v) {
  require(m.size() == v.size(), ErrorCode::kInvalidInput, "moment lists differ in length");
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace picknet::train
