// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "protomask/box.hpp"

namespace protomask {

struct PyramidLevel {
  int stride = 8;
  int grid_h = 0;
  int grid_w = 0;
  double scale = 24.0;  // anchor side length in input pixels
};

/// Fixed multi-scale anchor layout. Anchors are stored level-major, then
/// row-major over grid cells, then by aspect ratio.
class AnchorGrid {
 public:
  struct Location {
    std::size_t level, row, col, ratio;
  };

  AnchorGrid() = default;
  AnchorGrid(int input_size, std::vector<PyramidLevel> levels, std::vector<double> aspect_ratios);

  int input_size() const noexcept { return input_size_; }
  const std::vector<PyramidLevel>& levels() const noexcept { return levels_; }
  const std::vector<double>& aspect_ratios() const noexcept { return ratios_; }
  std::vector<double> scales() const;
  const std::vector<Box>& anchors() const noexcept { return anchors_; }
  std::size_t size() const noexcept { return anchors_.size(); }
  const Box& operator[](std::size_t i) const { return anchors_[i]; }

  /// First anchor index of each level.
  std::size_t level_offset(std::size_t level) const { return offsets_.at(level); }
  std::size_t index_of(const Location& loc) const;
  Location locate(std::size_t index) const;

 private:
  int input_size_ = 0;
  std::vector<PyramidLevel> levels_;
  std::vector<double> ratios_;
  std::vector<Box> anchors_;
  std::vector<std::size_t> offsets_;
};

/// Grid side of a level: ceil(input / stride).
int level_grid_size(int input_size, int stride);

/// Anchor at cell (i, j) of a level is centered at ((j+0.5)*stride,
/// (i+0.5)*stride) with width scale*sqrt(r) and height scale/sqrt(r),
/// normalized by input_size. Throws ConfigError on empty or mismatched lists.
AnchorGrid generate_anchors(int input_size, std::span<const int> strides,
                            std::span<const double> scales, std::span<const double> aspect_ratios);

enum class MatchKind { negative, ignored, positive };

struct AnchorMatch {
  MatchKind kind = MatchKind::negative;
  int gt = -1;           // assigned ground truth for positives, best-IoU gt otherwise (-1 if none)
  double max_iou = 0.0;  // best IoU over all ground truths
};

struct MatchResult {
  std::vector<AnchorMatch> anchors;

  std::vector<std::size_t> positives() const;
  std::size_t count(MatchKind kind) const;
};

struct MatchThresholds {
  double positive = 0.5;
  double negative = 0.4;
};

/// Max-IoU assignment: IoU >= positive -> positive, < negative -> negative,
/// otherwise ignored. Each ground truth additionally claims its best anchor
/// as a positive (ties broken by lowest index; ground truths with the highest
/// best-IoU claim first so two ground truths never fight over one anchor).
/// With no ground truth every anchor is negative.
MatchResult match_anchors(const AnchorGrid& grid, std::span<const Box> gts,
                          const MatchThresholds& thresholds = {});

}  // namespace protomask
