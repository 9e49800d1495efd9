// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/assembly.hpp"

#include <Eigen/Core>
#include <cmath>

namespace protomask {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMatrix<T>> view(const Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return Eigen::Map<const RowMatrix<T>>(t.data().data(), static_cast<Eigen::Index>(rows),
                                        static_cast<Eigen::Index>(cols));
}

template <typename T>
Eigen::Map<RowMatrix<T>> view(Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return Eigen::Map<RowMatrix<T>>(t.data().data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(cols));
}

template <typename T>
void check_operands(const Tensor<T>& prototypes, const Tensor<T>& coeffs) {
  if (prototypes.rank() != 3) throw DimensionError("assemble: prototypes must be [h, w, k]");
  if (coeffs.rank() != 2) throw DimensionError("assemble: coefficients must be [n, k]");
  if (prototypes.dim(2) != coeffs.dim(1)) {
    throw DimensionError("assemble: prototype count " + std::to_string(prototypes.dim(2)) +
                         " != coefficient width " + std::to_string(coeffs.dim(1)));
  }
}

}  // namespace

template <typename T>
Tensor<T> assemble(const Tensor<T>& prototypes, const Tensor<T>& coeffs) {
  check_operands(prototypes, coeffs);
  const std::size_t h = prototypes.dim(0), w = prototypes.dim(1), k = prototypes.dim(2);
  const std::size_t n = coeffs.dim(0);
  Tensor<T> masks({n, h, w});
  // (P C^T)^T = C P^T lands directly in [n, h*w] order.
  auto out = view(masks, n, h * w);
  out.noalias() = view(coeffs, n, k) * view(prototypes, h * w, k).transpose();
  out = out.unaryExpr([](T z) { return T{1} / (T{1} + std::exp(-z)); });
  return masks;
}

template <typename T>
AssembleGrads<T> assemble_backward(const Tensor<T>& prototypes, const Tensor<T>& coeffs,
                                   const Tensor<T>& masks, const Tensor<T>& dmasks) {
  check_operands(prototypes, coeffs);
  if (masks.shape() != dmasks.shape()) throw DimensionError("assemble_backward: shape mismatch");
  const std::size_t h = prototypes.dim(0), w = prototypes.dim(1), k = prototypes.dim(2);
  const std::size_t n = coeffs.dim(0);
  RowMatrix<T> dz = view(dmasks, n, h * w).array() * view(masks, n, h * w).array() *
                    (T{1} - view(masks, n, h * w).array());
  AssembleGrads<T> g{Tensor<T>(prototypes.shape()), Tensor<T>(coeffs.shape())};
  view(g.coeffs, n, k).noalias() = dz * view(prototypes, h * w, k);
  view(g.prototypes, h * w, k).noalias() = dz.transpose() * view(coeffs, n, k);
  return g;
}

template Tensor<float> assemble(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> assemble(const Tensor<double>&, const Tensor<double>&);
template AssembleGrads<float> assemble_backward(const Tensor<float>&, const Tensor<float>&,
                                                const Tensor<float>&, const Tensor<float>&);
template AssembleGrads<double> assemble_backward(const Tensor<double>&, const Tensor<double>&,
                                                 const Tensor<double>&, const Tensor<double>&);

MaskSet crop_and_threshold(const Tensor<double>& soft, std::span<const Box> boxes, double threshold,
                           int pad) {
  if (soft.rank() != 3) throw DimensionError("crop_and_threshold: masks must be [n, h, w]");
  if (soft.dim(0) != boxes.size()) throw DimensionError("crop_and_threshold: one box per mask");
  const std::size_t n = soft.dim(0), h = soft.dim(1), w = soft.dim(2);
  MaskSet out{soft, Tensor<double>(soft.shape()), {boxes.begin(), boxes.end()}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const PixelRect r = crop_region(boxes[i], static_cast<int>(h), static_cast<int>(w), pad);
    out.regions.push_back(r);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double& v = out.soft.at(i, y, x);
        if (!r.contains(static_cast<int>(x), static_cast<int>(y))) v = 0.0;
        out.binary.at(i, y, x) = v > threshold ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

Tensor<double> upscale_mask(const Tensor<double>& mask, std::size_t out_h, std::size_t out_w) {
  if (mask.rank() != 2) throw DimensionError("upscale_mask: mask must be [h, w]");
  const std::size_t h = mask.dim(0), w = mask.dim(1);
  if (out_h < h || out_w < w) throw DimensionError("upscale_mask: output smaller than input");
  Tensor<double> out({out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy = y * h / out_h;
    for (std::size_t x = 0; x < out_w; ++x) out.at(y, x) = mask.at(sy, x * w / out_w);
  }
  return out;
}

Tensor<double> mask_slice(const Tensor<double>& masks, std::size_t i) {
  if (masks.rank() != 3 || i >= masks.dim(0)) throw DimensionError("mask_slice: bad index");
  const std::size_t plane = masks.dim(1) * masks.dim(2);
  std::vector<double> values(masks.data().begin() + static_cast<std::ptrdiff_t>(i * plane),
                             masks.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * plane));
  return Tensor<double>({masks.dim(1), masks.dim(2)}, std::move(values));
}

}  // namespace protomask
