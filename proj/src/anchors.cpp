// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace protomask {

int level_grid_size(int input_size, int stride) {
  if (stride <= 0 || input_size <= 0) throw ConfigError("strides and input size must be positive");
  return (input_size + stride - 1) / stride;
}

AnchorGrid::AnchorGrid(int input_size, std::vector<PyramidLevel> levels,
                       std::vector<double> aspect_ratios)
    : input_size_(input_size), levels_(std::move(levels)), ratios_(std::move(aspect_ratios)) {
  const double size = static_cast<double>(input_size_);
  for (const auto& level : levels_) {
    offsets_.push_back(anchors_.size());
    for (int i = 0; i < level.grid_h; ++i) {
      for (int j = 0; j < level.grid_w; ++j) {
        const double cx = (j + 0.5) * level.stride / size;
        const double cy = (i + 0.5) * level.stride / size;
        for (double r : ratios_) {
          const double w = level.scale * std::sqrt(r) / size;
          const double h = level.scale / std::sqrt(r) / size;
          anchors_.push_back(Box::from_center(cx, cy, w, h));
        }
      }
    }
  }
}

std::vector<double> AnchorGrid::scales() const {
  std::vector<double> out;
  for (const auto& level : levels_) out.push_back(level.scale);
  return out;
}

std::size_t AnchorGrid::index_of(const Location& loc) const {
  const auto& level = levels_.at(loc.level);
  return offsets_.at(loc.level) +
         (loc.row * static_cast<std::size_t>(level.grid_w) + loc.col) * ratios_.size() + loc.ratio;
}

AnchorGrid::Location AnchorGrid::locate(std::size_t index) const {
  if (index >= anchors_.size()) throw DimensionError("anchor index out of range");
  std::size_t level = 0;
  while (level + 1 < offsets_.size() && offsets_[level + 1] <= index) ++level;
  const std::size_t local = index - offsets_[level];
  const std::size_t cell = local / ratios_.size();
  const auto w = static_cast<std::size_t>(levels_[level].grid_w);
  return {level, cell / w, cell % w, local % ratios_.size()};
}

AnchorGrid generate_anchors(int input_size, std::span<const int> strides,
                            std::span<const double> scales, std::span<const double> aspect_ratios) {
  if (strides.empty() || scales.empty() || aspect_ratios.empty()) {
    throw ConfigError("generate_anchors: strides, scales and aspect ratios must be non-empty");
  }
  if (strides.size() != scales.size()) {
    throw ConfigError("generate_anchors: one scale per stride is required");
  }
  for (double s : scales) {
    if (!(s > 0)) throw ConfigError("generate_anchors: scales must be positive");
  }
  for (double r : aspect_ratios) {
    if (!(r > 0)) throw ConfigError("generate_anchors: aspect ratios must be positive");
  }
  std::vector<PyramidLevel> levels;
  for (std::size_t i = 0; i < strides.size(); ++i) {
    const int g = level_grid_size(input_size, strides[i]);
    levels.push_back({strides[i], g, g, scales[i]});
  }
  return AnchorGrid(input_size, std::move(levels),
                    std::vector<double>(aspect_ratios.begin(), aspect_ratios.end()));
}

std::vector<std::size_t> MatchResult::positives() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (anchors[i].kind == MatchKind::positive) out.push_back(i);
  }
  return out;
}

std::size_t MatchResult::count(MatchKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      anchors.begin(), anchors.end(), [kind](const AnchorMatch& m) { return m.kind == kind; }));
}

MatchResult match_anchors(const AnchorGrid& grid, std::span<const Box> gts,
                          const MatchThresholds& thresholds) {
  if (thresholds.positive < thresholds.negative) {
    throw ConfigError("match_anchors: positive threshold below negative threshold");
  }
  MatchResult result;
  result.anchors.assign(grid.size(), AnchorMatch{});
  if (gts.empty()) return result;

  const auto& anchors = grid.anchors();
  const std::size_t n = anchors.size();
  const std::size_t m = gts.size();
  std::vector<double> overlap(n * m);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t g = 0; g < m; ++g) overlap[a * m + g] = iou(anchors[a], gts[g]);
  }

  for (std::size_t a = 0; a < n; ++a) {
    auto& match = result.anchors[a];
    for (std::size_t g = 0; g < m; ++g) {
      if (match.gt < 0 || overlap[a * m + g] > match.max_iou) {
        match.max_iou = overlap[a * m + g];
        match.gt = static_cast<int>(g);
      }
    }
    if (match.max_iou >= thresholds.positive) {
      match.kind = MatchKind::positive;
    } else if (match.max_iou < thresholds.negative) {
      match.kind = MatchKind::negative;
    } else {
      match.kind = MatchKind::ignored;
    }
  }

  // Forced positives: every gt with a positive-area overlap claims one anchor.
  std::vector<double> best_iou(m, 0.0);
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t a = 0; a < n; ++a) best_iou[g] = std::max(best_iou[g], overlap[a * m + g]);
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return best_iou[a] > best_iou[b]; });
  std::vector<bool> claimed(n, false);
  for (std::size_t g : order) {
    std::size_t best = n;
    double best_value = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (claimed[a]) continue;
      if (overlap[a * m + g] > best_value) {
        best_value = overlap[a * m + g];
        best = a;
      }
    }
    if (best == n) continue;
    claimed[best] = true;
    result.anchors[best].kind = MatchKind::positive;
    result.anchors[best].gt = static_cast<int>(g);
  }
  return result;
}

}  // namespace protomask
