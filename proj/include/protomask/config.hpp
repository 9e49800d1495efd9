// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "protomask/anchors.hpp"
#include "protomask/box.hpp"
#include "protomask/loss.hpp"

namespace protomask {

/// Step learning-rate schedule: the rate is divided by 10 at every
/// milestone, expressed as a fraction of the total iteration count.
struct TrainSchedule {
  int iterations = 2000;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<double> milestones = {0.6, 0.85};
  int warmup_iterations = 200;  // linear ramp from lr/10 when > 0
  double grad_clip = 10.0;      // global L2 norm clip when > 0
  double flip_probability = 0.5;
  int checkpoint_every = 500;
  std::uint64_t seed = 0;

  /// Iteration numbers (0-based) at which the rate drops.
  std::vector<int> milestone_iterations() const;
  double learning_rate_at(int iteration) const;
};

struct InferenceSettings {
  double score_threshold = 0.05;
  double nms_iou = 0.5;
  std::size_t nms_top_n = 200;
  std::size_t max_detections = 100;
  double mask_threshold = 0.5;
};

struct ModelConfig {
  int input_size = 128;
  int num_classes = 3;
  int num_prototypes = 32;
  std::vector<int> stem_channels = {16, 32};
  std::vector<int> stage_channels = {32, 64, 128};
  int fpn_channels = 64;
  int proto_channels = 64;
  int head_shared_convs = 1;
  std::vector<int> strides = {8, 16, 32};
  std::vector<double> anchor_scales = {24.0, 48.0, 96.0};
  std::vector<double> aspect_ratios = {1.0, 0.5, 2.0};
  BoxVariances variances;
  MatchThresholds match;
  double ohem_ratio = 3.0;
  LossWeights loss_weights;
  InferenceSettings inference;
  TrainSchedule schedule;

  std::size_t anchors_per_cell() const { return aspect_ratios.size(); }
  /// Side of the prototype grid: the stride-8 map upsampled x2, i.e. input/4.
  int prototype_size() const;
  /// Side of the stride-8 map the semantic head runs on.
  int semantic_size() const;
  /// Per-anchor prediction width: 4 box + (c + 1) class + k coefficients.
  std::size_t per_anchor_outputs() const;
  AnchorGrid make_anchors() const;

  /// Throws ConfigError naming the violated field.
  void validate() const;
};

/// Prototype grid side for a given input size: 2 * ceil(input / 8).
int prototype_grid_size(int input_size);

nlohmann::json to_json(const ModelConfig& cfg);
/// Missing fields keep their defaults; present fields must have the right type.
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace protomask
