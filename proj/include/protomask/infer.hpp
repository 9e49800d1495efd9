// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "protomask/eval.hpp"
#include "protomask/model.hpp"
#include "protomask/nms.hpp"

namespace protomask {

enum class NmsVariant { fast, sequential };
std::string to_string(NmsVariant v);
NmsVariant nms_variant_from_string(const std::string& s);

struct InferenceOptions {
  InferenceSettings settings;
  NmsVariant nms = NmsVariant::fast;
  bool boxes_only = false;
};

struct InferenceResult {
  std::vector<Detection> detections;  // score-descending
  ScoredDetections kept;              // post-NMS rows with coefficients
  Tensor<double> prototypes;          // [h, w, k]
  Tensor<double> soft_masks;          // [n, h, w] cropped, empty when boxes_only or no detections
  double network_ms = 0;
  double nms_ms = 0;
  double mask_ms = 0;  // assembly, crop, threshold and upscale
};

/// Runs the detector on a [3, S, S] image: softmax, box decode, per-class
/// score threshold, NMS, top-k cap, then mask assembly, crop at prototype
/// resolution with 1px pad, binarization and upscale to S x S.
template <typename T>
InferenceResult infer(const Model<T>& model, const Tensor<double>& image, const InferenceOptions& options);

/// Per-class candidates from raw outputs, before NMS.
template <typename T>
ScoredDetections candidate_detections(const AnchorGrid& anchors, const NetworkOutputs<T>& out,
                                      const ModelConfig& config, double score_threshold);

}  // namespace protomask
