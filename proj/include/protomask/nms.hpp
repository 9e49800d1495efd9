// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "protomask/box.hpp"

namespace protomask {

/// Parallel arrays of candidate detections; `coeffs`, when set, holds one
/// mask-coefficient row per detection.
struct ScoredDetections {
  std::vector<Box> boxes;
  std::vector<double> scores;
  std::vector<int> classes;
  std::optional<Tensor<double>> coeffs;

  std::size_t size() const noexcept { return boxes.size(); }
  bool empty() const noexcept { return boxes.empty(); }

  /// Rows `rows` in the given order (coefficient rows follow).
  ScoredDetections select(const std::vector<std::size_t>& rows) const;
  void validate() const;
};

/// Classic greedy NMS, per class: a detection is suppressed only by a kept,
/// higher-scoring detection of its class with IoU > iou_threshold.
/// Returns kept input rows: classes ascending, score descending within a
/// class, ties by input index.
std::vector<std::size_t> sequential_nms_indices(const ScoredDetections& d, double iou_threshold);

/// Fast NMS, per class: keep the top_n by score, build the pairwise IoU
/// matrix X, zero its diagonal and lower triangle, and keep column j iff
/// max_i X_ij <= iou_threshold. Removed detections may still suppress.
/// Same output ordering as sequential_nms_indices.
std::vector<std::size_t> fast_nms_indices(const ScoredDetections& d, double iou_threshold,
                                          std::size_t top_n);

ScoredDetections sequential_nms(const ScoredDetections& d, double iou_threshold);
ScoredDetections fast_nms(const ScoredDetections& d, double iou_threshold, std::size_t top_n);

/// Drops rows scoring below min_score, then keeps the max_per_image highest
/// scores, sorted by score descending (ties by input index).
std::vector<std::size_t> score_filter_indices(const ScoredDetections& d, double min_score,
                                              std::size_t max_per_image);
ScoredDetections score_filter(const ScoredDetections& d, double min_score,
                              std::size_t max_per_image);

}  // namespace protomask
