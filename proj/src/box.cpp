// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/box.hpp"

#include <algorithm>
#include <cmath>

namespace protomask {

namespace {

double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Box Box::clamped() const noexcept {
  Box b{clamp01(x1), clamp01(y1), clamp01(x2), clamp01(y2)};
  if (b.x2 < b.x1) b.x2 = b.x1;
  if (b.y2 < b.y1) b.y2 = b.y1;
  return b;
}

double iou(const Box& a, const Box& b) noexcept {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Tensor<double> iou_matrix(std::span<const Box> a, std::span<const Box> b) {
  if (a.empty() || b.empty()) throw DimensionError("iou_matrix: empty box list");
  Tensor<double> out({a.size(), b.size()});
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out.at(i, j) = iou(a[i], b[j]);
  }
  return out;
}

BoxDeltas encode_box(const Box& gt, const Box& anchor, const BoxVariances& v) {
  if (anchor.width() <= 0 || anchor.height() <= 0) {
    throw DegenerateBoxError("encode_box: anchor has non-positive size");
  }
  if (gt.width() <= 0 || gt.height() <= 0) {
    throw DegenerateBoxError("encode_box: ground-truth box has non-positive size");
  }
  return {(gt.center_x() - anchor.center_x()) / anchor.width() / v.center,
          (gt.center_y() - anchor.center_y()) / anchor.height() / v.center,
          std::log(gt.width() / anchor.width()) / v.size,
          std::log(gt.height() / anchor.height()) / v.size};
}

Box decode_box_unclamped(const BoxDeltas& t, const Box& anchor, const BoxVariances& v) {
  const double cx = anchor.center_x() + t[0] * v.center * anchor.width();
  const double cy = anchor.center_y() + t[1] * v.center * anchor.height();
  const double w = anchor.width() * std::exp(t[2] * v.size);
  const double h = anchor.height() * std::exp(t[3] * v.size);
  return Box::from_center(cx, cy, w, h);
}

Box decode_box(const BoxDeltas& t, const Box& anchor, const BoxVariances& v) {
  Box b = decode_box_unclamped(t, anchor, v);
  // exp overflow yields inf/nan corners; clamp absorbs inf, nan collapses to the anchor center.
  if (std::isnan(b.x1) || std::isnan(b.x2) || std::isnan(b.y1) || std::isnan(b.y2)) {
    b = Box::from_center(anchor.center_x(), anchor.center_y(), 0.0, 0.0);
  }
  return b.clamped();
}

PixelRect crop_region(const Box& box, int grid_h, int grid_w, int pad) {
  const auto scaled = [](double v, int n) { return v * static_cast<double>(n); };
  // Small epsilon keeps exact grid-aligned products from flooring/ceiling outward on round-off.
  constexpr double kSnap = 1e-9;
  int x0 = static_cast<int>(std::floor(scaled(box.x1, grid_w) + kSnap)) - pad;
  int y0 = static_cast<int>(std::floor(scaled(box.y1, grid_h) + kSnap)) - pad;
  int x1 = static_cast<int>(std::ceil(scaled(box.x2, grid_w) - kSnap)) + pad;
  int y1 = static_cast<int>(std::ceil(scaled(box.y2, grid_h) - kSnap)) + pad;
  x0 = std::clamp(x0, 0, grid_w);
  y0 = std::clamp(y0, 0, grid_h);
  x1 = std::clamp(x1, x0, grid_w);
  y1 = std::clamp(y1, y0, grid_h);
  return {x0, y0, x1, y1};
}

}  // namespace protomask
