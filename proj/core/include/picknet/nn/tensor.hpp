#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace picknet::nn {

// Dense row-major tensor.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, T fill = T{})
      : shape(std::move(s)), data(element_count(shape), fill) {}

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t size() const { return data.size(); }
  bool consistent() const { return element_count(shape) == data.size(); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  bool operator==(const Tensor&) const = default;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;

  bool operator==(const NamedTensor&) const = default;
};

}  // namespace picknet::nn
