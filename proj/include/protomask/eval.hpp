// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "protomask/box.hpp"
#include "protomask/dataset.hpp"
#include "protomask/tensor.hpp"

namespace protomask {

enum class EvalMode { mask, box };
std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(const std::string& s);

/// A final detection. `mask` is a binary [S, S] map at image resolution;
/// it may be empty in box mode.
struct Detection {
  int label = 0;
  double score = 0;
  Box box;
  Tensor<double> mask;
};

/// Binary-mask IoU; 0 when both masks are empty.
double mask_iou(const Tensor<double>& a, const Tensor<double>& b);

/// Greedy matching of score-sorted detections against ground truths given
/// their [dets, gts] IoU matrix (may have zero rows or columns, passed as
/// row-major values). Each detection takes the unmatched gt with the
/// highest IoU >= iou_threshold, lowest index on ties. Returns the matched
/// gt per detection, -1 for a false positive.
std::vector<int> match_detections(std::span<const double> iou, std::size_t n_dets, std::size_t n_gts,
                                  double iou_threshold);

/// 101-point interpolated AP of a score-ordered TP/FP sequence. nullopt when
/// there is nothing to score (no gts and no detections).
std::optional<double> average_precision(std::span<const bool> tp, std::size_t n_gt);

/// IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> coco_iou_thresholds();

struct EvalImage {
  std::vector<Detection> detections;
  std::vector<Instance> ground_truth;
};

struct MatchRecord {
  std::size_t image = 0;
  std::size_t detection = 0;  // index into that image's detections
  int label = 0;
  double score = 0;
  double threshold = 0;
  int gt = -1;       // matched gt index in the image, -1 for a false positive
  double iou = 0;    // IoU with the matched gt
};

struct EvalResult {
  EvalMode mode = EvalMode::mask;
  std::vector<std::string> class_names;
  std::vector<double> thresholds;
  /// [class][threshold]; nullopt for classes with no gts and no detections.
  std::vector<std::vector<std::optional<double>>> ap;
  double mAP = 0, AP50 = 0, AP75 = 0;
  std::size_t n_images = 0;
  std::vector<MatchRecord> matches;

  /// {classes: {...}, mAP, AP50, AP75, n_images, mode}
  nlohmann::json to_json() const;
};

EvalResult evaluate(std::span<const EvalImage> images, const std::vector<std::string>& class_names, EvalMode mode);

}  // namespace protomask
