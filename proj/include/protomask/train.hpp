// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>

#include "protomask/dataset.hpp"
#include "protomask/model.hpp"

namespace protomask {

/// The four losses of one sample and their gradients with respect to the
/// network outputs (already scaled by the loss weights).
struct SampleLoss {
  LossBreakdown breakdown;
  OutputGrads<double> grads;
};

/// Matches anchors to the sample's instances and evaluates classification
/// (OHEM), box, mask and semantic losses on `out`, which must come from a
/// training-mode forward pass.
SampleLoss sample_loss(const Model<double>& model, const NetworkOutputs<double>& out, const Sample& sample,
                       bool with_grads = true);

/// Forward, loss and backward for one sample. Accumulates parameter gradients.
LossBreakdown loss_and_backward(Model<double>& model, const Sample& sample);

/// Forward and loss only.
LossBreakdown sample_total_loss(const Model<double>& model, const Sample& sample);

struct TrainLogEntry {
  int iteration = 0;  // 1-based
  std::size_t sample = 0;
  bool flipped = false;
  double learning_rate = 0;
  LossBreakdown loss;

  nlohmann::json to_json() const;
};

struct TrainOptions {
  /// Directory for train_log.jsonl and checkpoint.ptck; no files when empty.
  std::filesystem::path out_dir;
  /// Called after every iteration.
  std::function<void(const TrainLogEntry&)> on_iteration;
};

struct TrainResult {
  int iterations_run = 0;
  int final_iteration = 0;
  std::vector<TrainLogEntry> log;
};

/// Index of the sample visited at 0-based `iteration`: epochs walk a
/// permutation drawn from (seed, epoch).
std::size_t sample_for_iteration(std::uint64_t seed, std::size_t n_samples, int iteration);
/// Whether the sample at `iteration` is mirrored.
bool flip_for_iteration(std::uint64_t seed, int iteration, double probability);

/// Runs iterations [start_iteration, schedule.iterations) of momentum SGD
/// with batch size 1. Everything random is a function of (seed, iteration),
/// so resuming from a checkpoint reproduces an uninterrupted run exactly.
/// A non-finite loss or activation aborts with NumericError; the checkpoint
/// on disk is then the last good one.
TrainResult train(Model<double>& model, std::span<const Sample> samples, int start_iteration = 0,
                  const TrainOptions& options = {});

/// Checkpoint file written by train() inside `out_dir`.
std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir);

/// Model plus the iteration it was saved at.
struct TrainingCheckpoint {
  Model<double> model;
  int iteration = 0;
};
void save_training_checkpoint(const std::filesystem::path& path, const Model<double>& model, int iteration);
TrainingCheckpoint load_training_checkpoint(const std::filesystem::path& path);

}  // namespace protomask
