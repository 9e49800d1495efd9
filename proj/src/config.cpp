// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/config.hpp"

#include <cmath>

namespace protomask {

std::vector<int> TrainSchedule::milestone_iterations() const {
  std::vector<int> out;
  for (double f : milestones) out.push_back(static_cast<int>(std::lround(f * iterations)));
  return out;
}

double TrainSchedule::learning_rate_at(int iteration) const {
  double lr = learning_rate;
  for (int m : milestone_iterations()) {
    if (iteration >= m) lr /= 10.0;
  }
  if (warmup_iterations > 0 && iteration < warmup_iterations) {
    const double t = static_cast<double>(iteration) / warmup_iterations;
    lr *= 0.1 + 0.9 * t;
  }
  return lr;
}

int prototype_grid_size(int input_size) { return 2 * level_grid_size(input_size, 8); }

int ModelConfig::prototype_size() const { return prototype_grid_size(input_size); }

int ModelConfig::semantic_size() const { return level_grid_size(input_size, strides.front()); }

std::size_t ModelConfig::per_anchor_outputs() const {
  return 4 + static_cast<std::size_t>(num_classes + 1) + static_cast<std::size_t>(num_prototypes);
}

AnchorGrid ModelConfig::make_anchors() const {
  return generate_anchors(input_size, strides, anchor_scales, aspect_ratios);
}

void ModelConfig::validate() const {
  const auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("config field \"" + field + "\": " + why);
  };
  if (input_size < 32) fail("input_size", "must be at least 32");
  if (num_classes < 1) fail("num_classes", "must be >= 1");
  if (num_prototypes < 1) fail("num_prototypes", "must be >= 1");
  if (stem_channels.size() != 2) fail("stem_channels", "exactly two stem convolutions reach stride 4");
  if (stage_channels.empty()) fail("stage_channels", "must be non-empty");
  if (strides.size() != stage_channels.size()) fail("strides", "one stride per backbone stage");
  for (std::size_t i = 0; i < strides.size(); ++i) {
    if (strides[i] != (8 << i)) fail("strides", "must be 8, 16, 32, ... (one doubling per stage)");
  }
  if (anchor_scales.size() != strides.size()) fail("anchor_scales", "one scale per stride");
  if (aspect_ratios.empty()) fail("aspect_ratios", "must be non-empty");
  for (int c : stem_channels) if (c < 1) fail("stem_channels", "must be positive");
  for (int c : stage_channels) if (c < 1) fail("stage_channels", "must be positive");
  if (fpn_channels < 1) fail("fpn_channels", "must be positive");
  if (proto_channels < 1) fail("proto_channels", "must be positive");
  if (head_shared_convs < 1) fail("head_shared_convs", "must be >= 1");
  if (match.positive < match.negative) fail("match", "positive threshold below negative");
  if (!(ohem_ratio > 0)) fail("ohem_ratio", "must be positive");
  if (!(inference.mask_threshold > 0 && inference.mask_threshold < 1)) {
    fail("inference.mask_threshold", "must lie in (0, 1)");
  }
  if (schedule.iterations < 0) fail("schedule.iterations", "must be non-negative");
  if (schedule.learning_rate < 0) fail("schedule.learning_rate", "must be non-negative");
}

nlohmann::json to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["input_size"] = cfg.input_size;
  j["num_classes"] = cfg.num_classes;
  j["num_prototypes"] = cfg.num_prototypes;
  j["stem_channels"] = cfg.stem_channels;
  j["stage_channels"] = cfg.stage_channels;
  j["fpn_channels"] = cfg.fpn_channels;
  j["proto_channels"] = cfg.proto_channels;
  j["head_shared_convs"] = cfg.head_shared_convs;
  j["strides"] = cfg.strides;
  j["anchor_scales"] = cfg.anchor_scales;
  j["aspect_ratios"] = cfg.aspect_ratios;
  j["variances"] = {{"center", cfg.variances.center}, {"size", cfg.variances.size}};
  j["match"] = {{"positive", cfg.match.positive}, {"negative", cfg.match.negative}};
  j["ohem_ratio"] = cfg.ohem_ratio;
  j["loss_weights"] = {{"cls", cfg.loss_weights.cls},
                       {"box", cfg.loss_weights.box},
                       {"mask", cfg.loss_weights.mask},
                       {"semantic", cfg.loss_weights.semantic}};
  j["inference"] = {{"score_threshold", cfg.inference.score_threshold},
                    {"nms_iou", cfg.inference.nms_iou},
                    {"nms_top_n", cfg.inference.nms_top_n},
                    {"max_detections", cfg.inference.max_detections},
                    {"mask_threshold", cfg.inference.mask_threshold}};
  const auto& s = cfg.schedule;
  j["schedule"] = {{"iterations", s.iterations},
                   {"learning_rate", s.learning_rate},
                   {"momentum", s.momentum},
                   {"weight_decay", s.weight_decay},
                   {"milestones", s.milestones},
                   {"warmup_iterations", s.warmup_iterations},
                   {"grad_clip", s.grad_clip},
                   {"flip_probability", s.flip_probability},
                   {"checkpoint_every", s.checkpoint_every},
                   {"seed", s.seed}};
  return j;
}

namespace {

template <typename V>
void read_field(const nlohmann::json& j, const char* key, V& out, const std::string& prefix = "") {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field \"" + prefix + key + "\" has the wrong type");
  }
}

}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ModelConfig cfg;
  read_field(j, "input_size", cfg.input_size);
  read_field(j, "num_classes", cfg.num_classes);
  read_field(j, "num_prototypes", cfg.num_prototypes);
  read_field(j, "stem_channels", cfg.stem_channels);
  read_field(j, "stage_channels", cfg.stage_channels);
  read_field(j, "fpn_channels", cfg.fpn_channels);
  read_field(j, "proto_channels", cfg.proto_channels);
  read_field(j, "head_shared_convs", cfg.head_shared_convs);
  read_field(j, "strides", cfg.strides);
  read_field(j, "anchor_scales", cfg.anchor_scales);
  read_field(j, "aspect_ratios", cfg.aspect_ratios);
  if (j.contains("variances")) {
    read_field(j["variances"], "center", cfg.variances.center, "variances.");
    read_field(j["variances"], "size", cfg.variances.size, "variances.");
  }
  if (j.contains("match")) {
    read_field(j["match"], "positive", cfg.match.positive, "match.");
    read_field(j["match"], "negative", cfg.match.negative, "match.");
  }
  read_field(j, "ohem_ratio", cfg.ohem_ratio);
  if (j.contains("loss_weights")) {
    const auto& w = j["loss_weights"];
    read_field(w, "cls", cfg.loss_weights.cls, "loss_weights.");
    read_field(w, "box", cfg.loss_weights.box, "loss_weights.");
    read_field(w, "mask", cfg.loss_weights.mask, "loss_weights.");
    read_field(w, "semantic", cfg.loss_weights.semantic, "loss_weights.");
  }
  if (j.contains("inference")) {
    const auto& inf = j["inference"];
    read_field(inf, "score_threshold", cfg.inference.score_threshold, "inference.");
    read_field(inf, "nms_iou", cfg.inference.nms_iou, "inference.");
    read_field(inf, "nms_top_n", cfg.inference.nms_top_n, "inference.");
    read_field(inf, "max_detections", cfg.inference.max_detections, "inference.");
    read_field(inf, "mask_threshold", cfg.inference.mask_threshold, "inference.");
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    read_field(s, "iterations", cfg.schedule.iterations, "schedule.");
    read_field(s, "learning_rate", cfg.schedule.learning_rate, "schedule.");
    read_field(s, "momentum", cfg.schedule.momentum, "schedule.");
    read_field(s, "weight_decay", cfg.schedule.weight_decay, "schedule.");
    read_field(s, "milestones", cfg.schedule.milestones, "schedule.");
    read_field(s, "warmup_iterations", cfg.schedule.warmup_iterations, "schedule.");
    read_field(s, "grad_clip", cfg.schedule.grad_clip, "schedule.");
    read_field(s, "flip_probability", cfg.schedule.flip_probability, "schedule.");
    read_field(s, "checkpoint_every", cfg.schedule.checkpoint_every, "schedule.");
    read_field(s, "seed", cfg.schedule.seed, "schedule.");
  }
  cfg.validate();
  return cfg;
}

}  // namespace protomask
