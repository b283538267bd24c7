#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cdc/errors.hpp"

namespace cdc {

// Dense n-dimensional array in row-major order. The gradient slot lives with
// the parameter that owns it (see Param in layers.hpp), not here.
template <class T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }

  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape)) {
      throw ConfigError("tensor data length does not match shape");
    }
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int e : s) {
      if (e <= 0) throw ConfigError("tensor extent must be positive");
      n *= static_cast<std::size_t>(e);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // CHW accessors for image-shaped tensors.
  T& at(int c, int h, int w) {
    return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
  }
  const T& at(int c, int h, int w) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
  }

  void fill(T v) { data.assign(data.size(), v); }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.reserve(data.size());
    for (const T& v : data) out.data.push_back(static_cast<U>(v));
    return out;
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace cdc
