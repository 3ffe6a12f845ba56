// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "convarrange/error.hpp"

namespace convarrange {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

/// Dense row-major array. Used for weights (F x C x k x k), activations
/// (N x C x H x W) and anything in between.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{})
      : shape(std::move(s)), data(element_count(shape), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != element_count(shape)) {
      fail(ErrorCode::ShapeMismatch, "shape " + shape_string(shape) + " holds " +
                                         std::to_string(element_count(shape)) +
                                         " elements, got " + std::to_string(data.size()));
    }
  }

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // 4-D accessors for the common NCHW / FCkk layout.
  T& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  const T& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }

  /// Contiguous slice along the leading axis.
  std::span<const T> slice(std::size_t index) const {
    const std::size_t stride = shape.empty() ? 0 : data.size() / shape[0];
    return std::span<const T>(data).subspan(index * stride, stride);
  }
  std::span<T> slice(std::size_t index) {
    const std::size_t stride = shape.empty() ? 0 : data.size() / shape[0];
    return std::span<T>(data).subspan(index * stride, stride);
  }

  bool operator==(const Tensor&) const = default;
};

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& in) {
  Tensor<To> out;
  out.shape = in.shape;
  out.data.assign(in.data.begin(), in.data.end());
  return out;
}

}  // namespace convarrange
