// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "protomask/config.hpp"
#include "protomask/errors.hpp"

namespace protomask {
namespace {

TEST(Config, JsonRoundTrip) {
  ModelConfig cfg;
  cfg.input_size = 96;
  cfg.num_prototypes = 8;
  cfg.stage_channels = {8, 16, 24};
  cfg.schedule.milestones = {0.5};
  cfg.schedule.seed = 99;
  cfg.inference.nms_top_n = 17;
  const ModelConfig back = model_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(back.input_size, 96);
  EXPECT_EQ(back.schedule.seed, 99u);
}

TEST(Config, PartialJsonKeepsDefaults) {
  const ModelConfig cfg = model_config_from_json(nlohmann::json{{"num_prototypes", 4}});
  EXPECT_EQ(cfg.num_prototypes, 4);
  EXPECT_EQ(cfg.input_size, ModelConfig{}.input_size);
  EXPECT_EQ(cfg.loss_weights.mask, 6.125);
}

TEST(Config, WrongTypesAreConfigErrors) {
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"num_prototypes", "eight"}}), ConfigError);
  EXPECT_THROW(model_config_from_json(nlohmann::json::array()), ConfigError);
  try {
    model_config_from_json(nlohmann::json{{"schedule", {{"learning_rate", "fast"}}}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
}

TEST(Config, ValidationNamesTheField) {
  ModelConfig cfg;
  cfg.strides = {8, 16, 64};
  try {
    cfg.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("strides"), std::string::npos);
  }
  ModelConfig bad_thresholds;
  bad_thresholds.match.positive = 0.3;
  EXPECT_THROW(bad_thresholds.validate(), ConfigError);
  EXPECT_NO_THROW(ModelConfig{}.validate());
}

TEST(Config, DerivedSizes) {
  EXPECT_EQ(prototype_grid_size(550), 138);
  EXPECT_EQ(prototype_grid_size(128), 32);
  EXPECT_EQ(prototype_grid_size(100), 26);
  ModelConfig cfg;
  cfg.num_classes = 3;
  cfg.num_prototypes = 8;
  EXPECT_EQ(cfg.per_anchor_outputs(), 16u);
  EXPECT_EQ(cfg.semantic_size(), 16);
}

TEST(Schedule, StepDecayAndWarmup) {
  TrainSchedule s;
  s.iterations = 1000;
  s.learning_rate = 1.0;
  s.milestones = {0.6, 0.85};
  s.warmup_iterations = 0;
  EXPECT_EQ(s.milestone_iterations(), (std::vector<int>{600, 850}));
  EXPECT_EQ(s.learning_rate_at(0), 1.0);
  EXPECT_EQ(s.learning_rate_at(599), 1.0);
  EXPECT_NEAR(s.learning_rate_at(600), 0.1, 1e-15);
  EXPECT_NEAR(s.learning_rate_at(999), 0.01, 1e-15);
  s.warmup_iterations = 100;
  EXPECT_NEAR(s.learning_rate_at(0), 0.1, 1e-15);
  EXPECT_NEAR(s.learning_rate_at(50), 0.55, 1e-15);
  EXPECT_EQ(s.learning_rate_at(100), 1.0);
}

}  // namespace
}  // namespace protomask
