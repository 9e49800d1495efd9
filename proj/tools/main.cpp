// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "protomask/commands.hpp"
#include "protomask/errors.hpp"

using namespace protomask;

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const IoError*>(&e)) return 3;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const ValidationError*>(&e)) return 4;
  if (dynamic_cast<const NumericError*>(&e)) return 5;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"protomask: prototype-mask instance segmentation toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Write a synthetic shapes dataset");
  generate->add_option("--seed", gen.seed, "Random seed")->default_val(0);
  generate->add_option("--count", gen.count, "Number of samples")->default_val(500);
  generate->add_option("--size", gen.options.size, "Image side in pixels")->default_val(128);
  generate->add_option("--max-instances", gen.options.max_instances, "Shapes per image (upper bound)")->default_val(4);
  generate->add_option("--out", gen_out, "Output directory")->required();

  TrainArgs tr;
  std::string tr_data, tr_config, tr_out;
  int tr_iters = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset directory");
  train_cmd->add_option("--data", tr_data, "Dataset directory")->required();
  train_cmd->add_option("--config", tr_config, "Model config JSON");
  train_cmd->add_option("--out", tr_out, "Output directory")->required();
  auto* iters_opt = train_cmd->add_option("--iters", tr_iters, "Number of iterations (overrides config)");
  train_cmd->add_option("--seed", tr.seed, "Random seed")->default_val(0);
  train_cmd->add_flag("--resume", tr.resume, "Continue from <out>/checkpoint.ptck");
  train_cmd->add_flag("--quiet", tr.quiet, "No progress lines on stderr");

  InferArgs inf;
  std::string inf_ckpt, inf_image, inf_data, inf_out, inf_nms = "fast", inf_precision = "f32";
  double inf_score = 0;
  auto* infer_cmd = app.add_subcommand("infer", "Run detection on an image or a dataset");
  infer_cmd->add_option("--ckpt", inf_ckpt, "Checkpoint file")->required();
  auto* image_opt = infer_cmd->add_option("--image", inf_image, "P6 image");
  auto* data_opt = infer_cmd->add_option("--data", inf_data, "Dataset directory");
  image_opt->excludes(data_opt);
  infer_cmd->add_option("--out", inf_out, "Output directory")->required();
  infer_cmd->add_flag("--boxes-only", inf.boxes_only, "Skip the mask branch");
  auto* score_opt = infer_cmd->add_option("--score-thresh", inf_score, "Minimum detection score");
  infer_cmd->add_option("--nms", inf_nms, "fast or sequential")->default_val("fast");
  infer_cmd->add_option("--precision", inf_precision, "f32 or f64")->default_val("f32");
  infer_cmd->add_flag("--viz", inf.viz, "Write overlay.ppm per image");

  EvalArgs ev;
  std::string ev_ckpt, ev_data, ev_out, ev_mode = "mask", ev_nms = "fast", ev_precision = "f64";
  auto* eval_cmd = app.add_subcommand("eval", "Compute COCO-style AP on a dataset");
  eval_cmd->add_option("--ckpt", ev_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", ev_data, "Dataset directory")->required();
  eval_cmd->add_option("--out", ev_out, "Output directory")->required();
  eval_cmd->add_option("--mode", ev_mode, "mask or box")->default_val("mask");
  eval_cmd->add_option("--nms", ev_nms, "fast or sequential")->default_val("fast");
  eval_cmd->add_option("--precision", ev_precision, "f32 or f64")->default_val("f64");

  BenchArgs bench;
  std::string bench_out, bench_variant = "fast";
  auto* bench_cmd = app.add_subcommand("bench-nms", "Time fast and sequential NMS");
  bench_cmd->add_option("--n", bench.n, "Detections per class")->default_val(100);
  bench_cmd->add_option("--c", bench.c, "Number of classes")->default_val(8);
  bench_cmd->add_option("--trials", bench.trials, "Number of trials")->default_val(100);
  bench_cmd->add_option("--variant", bench_variant, "fast or sequential")->default_val("fast");
  bench_cmd->add_option("--iou", bench.iou_threshold, "IoU threshold")->default_val(0.5);
  bench_cmd->add_option("--seed", bench.seed, "Random seed")->default_val(0);
  bench_cmd->add_option("--out", bench_out, "Output directory")->required();

  VizArgs viz;
  std::string viz_ckpt, viz_image, viz_out;
  auto* viz_cmd = app.add_subcommand("viz-protos", "Write prototype activations and the top mask");
  viz_cmd->add_option("--ckpt", viz_ckpt, "Checkpoint file")->required();
  viz_cmd->add_option("--image", viz_image, "P6 image")->required();
  viz_cmd->add_option("--out", viz_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json report;
    if (*generate) {
      gen.out = gen_out;
      report = cmd_generate(gen);
    } else if (*train_cmd) {
      tr.data = tr_data;
      tr.out = tr_out;
      if (!tr_config.empty()) tr.config = tr_config;
      if (*iters_opt) tr.iterations = tr_iters;
      report = cmd_train(tr);
    } else if (*infer_cmd) {
      inf.ckpt = inf_ckpt;
      inf.out = inf_out;
      if (*image_opt) inf.image = inf_image;
      if (*data_opt) inf.data = inf_data;
      if (*score_opt) inf.score_threshold = inf_score;
      inf.nms = nms_variant_from_string(inf_nms);
      inf.precision = precision_from_string(inf_precision);
      report = cmd_infer(inf);
    } else if (*eval_cmd) {
      ev.ckpt = ev_ckpt;
      ev.data = ev_data;
      ev.out = ev_out;
      ev.mode = eval_mode_from_string(ev_mode);
      ev.nms = nms_variant_from_string(ev_nms);
      ev.precision = precision_from_string(ev_precision);
      report = cmd_eval(ev);
    } else if (*bench_cmd) {
      bench.out = bench_out;
      bench.variant = nms_variant_from_string(bench_variant);
      report = cmd_bench_nms(bench);
    } else if (*viz_cmd) {
      viz.ckpt = viz_ckpt;
      viz.image = viz_image;
      viz.out = viz_out;
      report = cmd_viz_protos(viz);
    }
    std::cout << report.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
