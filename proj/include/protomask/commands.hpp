// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "protomask/dataset.hpp"
#include "protomask/eval.hpp"
#include "protomask/infer.hpp"

// Subcommands of the protomask executable. Each writes its outputs plus a
// config.json and manifest.json under `out` and returns its report.

namespace protomask {

/// Worker count from PROTOMASK_THREADS (default 1), capped by the hardware.
unsigned thread_limit();

struct GenerateArgs {
  std::uint64_t seed = 0;
  std::size_t count = 500;
  GeneratorOptions options;
  std::filesystem::path out;
};
nlohmann::json cmd_generate(const GenerateArgs& args);

struct TrainArgs {
  std::filesystem::path data;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<int> iterations;
  std::uint64_t seed = 0;
  bool resume = false;  // continue from out/checkpoint.ptck when present
  bool quiet = false;
};
nlohmann::json cmd_train(const TrainArgs& args);

enum class Precision { f32, f64 };
Precision precision_from_string(const std::string& s);

struct InferArgs {
  std::filesystem::path ckpt;
  std::optional<std::filesystem::path> image;  // a P6 image
  std::optional<std::filesystem::path> data;   // a dataset directory
  std::filesystem::path out;
  bool boxes_only = false;
  std::optional<double> score_threshold;
  NmsVariant nms = NmsVariant::fast;
  Precision precision = Precision::f32;
  bool viz = false;
};
nlohmann::json cmd_infer(const InferArgs& args);

struct EvalArgs {
  std::filesystem::path ckpt;
  std::filesystem::path data;
  std::filesystem::path out;
  EvalMode mode = EvalMode::mask;
  NmsVariant nms = NmsVariant::fast;
  Precision precision = Precision::f64;
};
/// The report JSON; the full EvalResult (with match records) is returned
/// through `result` when given.
nlohmann::json cmd_eval(const EvalArgs& args, EvalResult* result = nullptr);

struct BenchArgs {
  std::size_t n = 100;  // detections per class
  std::size_t c = 8;    // classes
  std::size_t trials = 100;
  NmsVariant variant = NmsVariant::fast;  // the variant whose timings head the report
  double iou_threshold = 0.5;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
/// Times NMS on random clustered detections. Both variants always run so
/// the divergence rate (fraction of trials whose kept sets differ) can be
/// reported; per-trial kept sets go to trials.json.
nlohmann::json cmd_bench_nms(const BenchArgs& args);

/// Recomputes the divergence rate from a trials.json document.
double audit_divergence_rate(const nlohmann::json& trials);

/// Random detections for one benchmark trial: `n` per class, drawn around
/// a few cluster centers so that overlaps are common.
ScoredDetections bench_detections(std::uint64_t seed, std::size_t trial, std::size_t n, std::size_t c);

struct VizArgs {
  std::filesystem::path ckpt;
  std::filesystem::path image;
  std::filesystem::path out;
};
nlohmann::json cmd_viz_protos(const VizArgs& args);

/// Color of the i-th instance in overlays: a fixed 10-color palette, cycled.
std::array<std::uint8_t, 3> palette_color(std::size_t index);

/// Loads a P6 image as a [3, S, S] tensor in [0, 1].
Tensor<double> load_image(const std::filesystem::path& path);

}  // namespace protomask
