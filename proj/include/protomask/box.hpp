// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

#include "protomask/tensor.hpp"

namespace protomask {

/// Axis-aligned box in corner form. Coordinates are normalized to [0, 1]
/// by image width/height (anchors may extend past the image).
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
  double center_x() const noexcept { return 0.5 * (x1 + x2); }
  double center_y() const noexcept { return 0.5 * (y1 + y2); }

  static Box from_center(double cx, double cy, double w, double h) noexcept {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  Box clamped() const noexcept;
  Box flipped_horizontally() const noexcept { return {1.0 - x2, y1, 1.0 - x1, y2}; }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Intersection over union; 0 when the union has zero area.
double iou(const Box& a, const Box& b) noexcept;

/// [n x m] matrix of pairwise IoU.
Tensor<double> iou_matrix(std::span<const Box> a, std::span<const Box> b);

struct BoxVariances {
  double center = 0.1;
  double size = 0.2;
};

using BoxDeltas = std::array<double, 4>;

/// SSD-style regression target of `gt` relative to `anchor`.
/// Throws DegenerateBoxError for non-positive gt or anchor sides.
BoxDeltas encode_box(const Box& gt, const Box& anchor, const BoxVariances& v = {});

/// Inverse of encode_box followed by clamping to [0, 1].
Box decode_box(const BoxDeltas& t, const Box& anchor, const BoxVariances& v = {});

/// Same as decode_box but without the final clamp.
Box decode_box_unclamped(const BoxDeltas& t, const Box& anchor, const BoxVariances& v = {});

/// Half-open integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const noexcept { return x1 > x0 ? x1 - x0 : 0; }
  int height() const noexcept { return y1 > y0 ? y1 - y0 : 0; }
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// The region of a grid_h x grid_w prototype grid covered by `box`: scaled
/// corners floored/ceiled outward, grown by `pad` pixels, clamped to the grid.
PixelRect crop_region(const Box& box, int grid_h, int grid_w, int pad);

}  // namespace protomask
