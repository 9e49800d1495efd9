// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <string>

#include "protomask/errors.hpp"
#include "protomask/infer.hpp"
#include "protomask/train.hpp"
#include "test_util.hpp"

namespace protomask {
namespace {

using testing::temp_dir;
using testing::tiny_config;
using testing::tiny_generator;

std::vector<Sample> tiny_samples(std::size_t n) { return generate_dataset(31, n, tiny_generator()).samples; }

std::vector<std::vector<double>> weights_of(Model<double>& model) {
  std::vector<std::vector<double>> out;
  for (LayerParams<double>* p : model.parameters()) {
    out.push_back(p->weights.values());
    out.push_back(p->bias.values());
  }
  return out;
}

TEST(Train, ZeroLearningRateLeavesWeightsUntouched) {
  ModelConfig cfg = tiny_config();
  cfg.schedule.iterations = 5;
  cfg.schedule.learning_rate = 0.0;
  Model<double> model(cfg, 1);
  const auto before = weights_of(model);
  const auto result = train(model, tiny_samples(4));
  EXPECT_EQ(result.iterations_run, 5);
  EXPECT_EQ(weights_of(model), before);
}

TEST(Train, LossDecreasesOnASingleSample) {
  ModelConfig cfg = tiny_config();
  cfg.schedule.iterations = 300;
  cfg.schedule.learning_rate = 5e-3;
  cfg.schedule.flip_probability = 0.0;
  Model<double> model(cfg, 2);
  const auto samples = tiny_samples(1);
  const double first = sample_total_loss(model, samples[0]).total;
  train(model, samples);
  EXPECT_LT(sample_total_loss(model, samples[0]).total, 0.8 * first);
}

TEST(Train, ResumeIsBitIdentical) {
  ModelConfig cfg = tiny_config();
  cfg.schedule.iterations = 8;
  cfg.schedule.checkpoint_every = 4;
  cfg.schedule.seed = 5;
  const auto samples = tiny_samples(6);

  Model<double> straight(cfg, 3);
  const auto dir_a = temp_dir("resume_a");
  TrainOptions a;
  a.out_dir = dir_a;
  train(straight, samples, 0, a);

  // Interrupt the same schedule one iteration past the iteration-4 checkpoint.
  struct Interrupt {};
  Model<double> first(cfg, 3);
  const auto dir_b = temp_dir("resume_b");
  TrainOptions b;
  b.out_dir = dir_b;
  b.on_iteration = [](const TrainLogEntry& e) {
    if (e.iteration == 5) throw Interrupt{};
  };
  EXPECT_THROW(train(first, samples, 0, b), Interrupt);
  const TrainingCheckpoint ckpt = load_training_checkpoint(checkpoint_path(dir_b));
  EXPECT_EQ(ckpt.iteration, 4);
  Model<double> resumed = ckpt.model;
  b.on_iteration = nullptr;
  train(resumed, samples, ckpt.iteration, b);
  EXPECT_EQ(weights_of(resumed), weights_of(straight));

  // The appended log matches the uninterrupted one line for line.
  const auto read_lines = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
  };
  EXPECT_EQ(read_lines(dir_b / "train_log.jsonl"), read_lines(dir_a / "train_log.jsonl"));
}

TEST(Train, SampleOrderIsAPermutationPerEpoch) {
  std::vector<int> seen(7, 0);
  for (int it = 0; it < 7; ++it) ++seen[sample_for_iteration(9, 7, it)];
  for (int n : seen) EXPECT_EQ(n, 1);
  EXPECT_EQ(sample_for_iteration(9, 7, 3), sample_for_iteration(9, 7, 3));
}

TEST(Train, RejectsBadStart) {
  ModelConfig cfg = tiny_config();
  cfg.schedule.iterations = 3;
  Model<double> model(cfg, 1);
  EXPECT_THROW(train(model, tiny_samples(1), 4), ConfigError);
  EXPECT_THROW(train(model, std::vector<Sample>{}), ConfigError);
}

TEST(Infer, OutputsAreConsistent) {
  const Model<double> model(ModelConfig{}, 4);
  const Sample s = generate_sample(32, 0, GeneratorOptions{});
  InferenceOptions options;
  options.settings.score_threshold = 0.0;
  const InferenceResult r = infer(model, s.image, options);
  ASSERT_FALSE(r.detections.empty());
  EXPECT_LE(r.detections.size(), options.settings.max_detections);
  for (std::size_t i = 0; i < r.detections.size(); ++i) {
    const Detection& d = r.detections[i];
    if (i > 0) EXPECT_LE(d.score, r.detections[i - 1].score);
    EXPECT_EQ(d.mask.shape(), (Shape{128, 128}));
    for (double v : d.mask.values()) EXPECT_TRUE(v == 0.0 || v == 1.0);
    EXPECT_GE(d.box.x1, 0.0);
    EXPECT_LE(d.box.x2, 1.0);
  }
}

TEST(Infer, ScoreThresholdOfOneKeepsNothing) {
  const Model<double> model(ModelConfig{}, 4);
  InferenceOptions options;
  options.settings.score_threshold = 1.0;
  EXPECT_TRUE(infer(model, generate_sample(33, 0, GeneratorOptions{}).image, options).detections.empty());
}

TEST(Infer, BoxesOnlyGivesTheSameBoxes) {
  const Model<double> model(ModelConfig{}, 5);
  const Sample s = generate_sample(34, 0, GeneratorOptions{});
  InferenceOptions full;
  full.settings.score_threshold = 0.01;
  InferenceOptions boxes = full;
  boxes.boxes_only = true;
  for (NmsVariant v : {NmsVariant::fast, NmsVariant::sequential}) {
    full.nms = boxes.nms = v;
    const auto a = infer(model, s.image, full), b = infer(model, s.image, boxes);
    ASSERT_EQ(a.detections.size(), b.detections.size());
    for (std::size_t i = 0; i < a.detections.size(); ++i) {
      EXPECT_EQ(a.detections[i].label, b.detections[i].label);
      EXPECT_EQ(a.detections[i].score, b.detections[i].score);
      EXPECT_EQ(a.detections[i].box.x1, b.detections[i].box.x1);
      EXPECT_EQ(a.detections[i].box.y2, b.detections[i].box.y2);
      EXPECT_TRUE(b.detections[i].mask.empty());
    }
  }
}

TEST(Infer, SinglePrecisionAgreesWithDouble) {
  const Model<double> model(ModelConfig{}, 6);
  const Model<float> single = model.cast<float>();
  const Sample s = generate_sample(35, 0, GeneratorOptions{});
  InferenceOptions options;
  options.settings.score_threshold = 0.2;
  const auto a = infer(model, s.image, options), b = infer(single, s.image, options);
  ASSERT_EQ(a.detections.size(), b.detections.size());
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    EXPECT_NEAR(a.detections[i].score, b.detections[i].score, 1e-4);
  }
}

}  // namespace
}  // namespace protomask
