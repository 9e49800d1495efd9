// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "protomask/box.hpp"
#include "protomask/tensor.hpp"

namespace protomask {

/// Instance masks from prototypes and coefficients: sigmoid(P C^T), with
/// `prototypes` an [h, w, k] stack and `coeffs` an [n, k] matrix. Returns
/// [n, h, w]. Throws DimensionError when k disagrees.
template <typename T>
Tensor<T> assemble(const Tensor<T>& prototypes, const Tensor<T>& coeffs);

template <typename T>
struct AssembleGrads {
  Tensor<T> prototypes;
  Tensor<T> coeffs;
};

/// Backward of assemble given its output `masks` and upstream `dmasks`.
template <typename T>
AssembleGrads<T> assemble_backward(const Tensor<T>& prototypes, const Tensor<T>& coeffs,
                                   const Tensor<T>& masks, const Tensor<T>& dmasks);

struct MaskSet {
  Tensor<double> soft;    // [n, h, w], zero outside each crop region
  Tensor<double> binary;  // [n, h, w] in {0, 1}
  std::vector<Box> boxes;
  std::vector<PixelRect> regions;
};

inline constexpr int kInferenceCropPad = 1;

/// Zeroes every pixel outside crop_region(box, h, w, pad) and binarizes at
/// `threshold` with a strict comparison (value > threshold -> 1).
MaskSet crop_and_threshold(const Tensor<double>& soft, std::span<const Box> boxes, double threshold,
                           int pad = kInferenceCropPad);

/// Nearest-neighbour upscale of an [h, w] mask to [out_h, out_w].
Tensor<double> upscale_mask(const Tensor<double>& mask, std::size_t out_h, std::size_t out_w);

/// Row `i` of an [n, h, w] tensor as an [h, w] tensor.
Tensor<double> mask_slice(const Tensor<double>& masks, std::size_t i);

}  // namespace protomask
