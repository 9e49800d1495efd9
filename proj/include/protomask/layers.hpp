// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "protomask/tensor.hpp"

// Forward and hand-written backward passes for the fixed set of layers the
// network needs. Backward functions return the gradient with respect to
// their data inputs and accumulate parameter gradients into the `grad`
// slot of the parameter tensors.

namespace protomask {

/// Convolution parameters. Weights are [out, in, kernel, kernel], bias [out].
template <typename T>
struct LayerParams {
  std::string name;
  Tensor<T> weights;
  Tensor<T> bias;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  // SGD momentum buffers, same shapes as weights/bias once allocated.
  Tensor<T> weights_velocity;
  Tensor<T> bias_velocity;

  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t out_channels() const { return weights.dim(0); }

  /// Kaiming-uniform weights scaled by fan-in, zero bias. Only odd square
  /// kernels (1x1, 3x3) are accepted.
  static LayerParams conv(std::string name, std::size_t in_channels, std::size_t out_channels,
                          int kernel, int stride, std::mt19937_64& rng);

  template <typename U>
  LayerParams<U> cast() const;
};

template <typename T>
template <typename U>
LayerParams<U> LayerParams<T>::cast() const {
  LayerParams<U> out;
  out.name = name;
  out.weights = weights.template cast<U>();
  out.bias = bias.template cast<U>();
  out.kernel = kernel;
  out.stride = stride;
  out.padding = padding;
  if (!weights_velocity.empty()) out.weights_velocity = weights_velocity.template cast<U>();
  if (!bias_velocity.empty()) out.bias_velocity = bias_velocity.template cast<U>();
  return out;
}

template <typename T>
struct MatmulGrads {
  Tensor<T> da;
  Tensor<T> db;
};

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// dA = dOut * B^T, dB = A^T * dOut.
template <typename T>
MatmulGrads<T> matmul_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& dout);

/// Output spatial size of a convolution: "same" for stride 1, ceil(n/2) for stride 2.
std::size_t conv_output_size(std::size_t input, int kernel, int stride, int padding);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const LayerParams<T>& p);
template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& x, LayerParams<T>& p, const Tensor<T>& dout);

enum class Activation { relu, tanh, sigmoid };

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind);
/// Backward in terms of the forward output `y`.
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& y, const Tensor<T>& dout, Activation kind);

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);
template <typename T>
Tensor<T> softmax_rows_backward(const Tensor<T>& y, const Tensor<T>& dout);

/// Bilinear x2 upsampling of a [C, H, W] map, align_corners = false.
template <typename T>
Tensor<T> upsample_bilinear_x2(const Tensor<T>& x);
template <typename T>
Tensor<T> upsample_bilinear_x2_backward(const Tensor<T>& dout, std::size_t in_h, std::size_t in_w);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// Top-left [C, h, w] window of a [C, H, W] map.
template <typename T>
Tensor<T> crop_spatial(const Tensor<T>& x, std::size_t h, std::size_t w);
template <typename T>
Tensor<T> crop_spatial_backward(const Tensor<T>& dout, std::size_t full_h, std::size_t full_w);

/// [G*D, H, W] -> [H*W*G, D]: row (i*W + j)*G + g holds channels g*D..g*D+D-1
/// at cell (i, j). Aligns per-anchor head outputs with anchor order.
template <typename T>
Tensor<T> channels_to_rows(const Tensor<T>& x, std::size_t groups);
template <typename T>
Tensor<T> rows_to_channels(const Tensor<T>& rows, std::size_t groups, std::size_t h, std::size_t w);

/// [C, H, W] -> [H, W, C] and its inverse.
template <typename T>
Tensor<T> chw_to_hwc(const Tensor<T>& x);
template <typename T>
Tensor<T> hwc_to_chw(const Tensor<T>& x);

}  // namespace protomask
