// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "protomask/errors.hpp"

namespace protomask {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major n-dimensional array with an optional gradient buffer of
/// the same shape. The value type of the differentiable core.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor holds real values");

 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape();
    if (data_.size() != shape_numel(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool has_grad() const noexcept { return grad_.has_value(); }

  /// Allocates a zeroed gradient buffer if none exists.
  std::span<T> ensure_grad() {
    if (!grad_) grad_.emplace(data_.size(), T{0});
    return *grad_;
  }
  std::span<T> grad() {
    if (!grad_) throw StateError("tensor " + shape_string(shape_) + " has no gradient");
    return *grad_;
  }
  std::span<const T> grad() const {
    if (!grad_) throw StateError("tensor " + shape_string(shape_) + " has no gradient");
    return *grad_;
  }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), T{0});
  }
  void clear_grad() noexcept { grad_.reset(); }

  /// Accumulates `g` (same length) into the gradient buffer.
  void accumulate_grad(std::span<const T> g) {
    if (g.size() != data_.size()) throw DimensionError("gradient length mismatch");
    auto dst = ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }

  Tensor reshaped(Shape shape) const {
    Tensor out;
    out.shape_ = std::move(shape);
    if (shape_numel(out.shape_) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                           shape_string(out.shape_));
    }
    out.data_ = data_;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> converted(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(converted));
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate_shape() const {
    for (std::size_t d : shape_) {
      if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
  std::optional<std::vector<T>> grad_;
};

using Tensor64 = Tensor<double>;
using Tensor32 = Tensor<float>;

/// Throws NumericError naming `where` if `t` holds a NaN or Inf.
template <typename T>
void require_finite(const Tensor<T>& t, std::string_view where) {
  if (!t.all_finite()) {
    throw NumericError("non-finite value in " + std::string(where));
  }
}

}  // namespace protomask
