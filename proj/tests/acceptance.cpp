// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks 1-10. Usage: acceptance [N ...] [--workdir DIR]
// Prints one PASS/FAIL line per criterion and exits non-zero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "protomask/assembly.hpp"
#include "protomask/commands.hpp"
#include "protomask/errors.hpp"
#include "protomask/layers.hpp"
#include "protomask/loss.hpp"
#include "protomask/nms.hpp"
#include "protomask/train.hpp"
#include "test_util.hpp"

namespace {

using namespace protomask;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Tolerances and budgets.
constexpr std::size_t kNmsTrials = 1200;
constexpr double kNmsBudgetSeconds = 60.0;
constexpr double kApGapTolerance = 0.01;
constexpr double kGradTolerance = 1e-4;
constexpr int kGradInstances = 5;
constexpr double kGradBudgetSeconds = 300.0;
constexpr double kAssemblyTolerance = 1e-6;
constexpr std::size_t kAssemblyPairs = 100;
constexpr int kOverfitSamples = 8;
constexpr int kOverfitIterations = 2000;
constexpr double kOverfitMaskAp50 = 0.9;
constexpr double kOverfitLossDrop = 0.8;
constexpr double kOverfitBudgetSeconds = 15 * 60.0;
constexpr std::size_t kDeskTrain = 500;
constexpr std::size_t kDeskTest = 100;
constexpr int kDeskIterations = 20000;
constexpr double kDeskMaskAp50 = 0.5;
constexpr double kDeskBoxSlack = 0.05;
constexpr double kSeparationIou = 0.5;
constexpr double kDeskBudgetSeconds = 2 * 3600.0;
constexpr double kApOracleTolerance = 1e-9;
constexpr double kMaskLossTolerance = 1e-9;
constexpr std::size_t kBenchTrials = 20;

constexpr std::uint64_t kDeskTrainSeed = 11;
constexpr std::uint64_t kDeskTestSeed = 12;
constexpr std::uint64_t kDeskRunSeed = 11;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  return nlohmann::json::parse(in);
}

void write_config(const fs::path& path, const ModelConfig& cfg) {
  fs::create_directories(path.parent_path());
  std::ofstream(path) << to_json(cfg).dump(2);
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// ---------------------------------------------------------------------------
// 1. Fast NMS keeps a subset of sequential NMS.

Outcome criterion_1(const fs::path&) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> pick_n(1, 256), pick_c(1, 8);
  const double thresholds[] = {0.3, 0.5, 0.7};
  std::size_t violations = 0, strict = 0, boxes = 0;
  for (std::size_t trial = 0; trial < kNmsTrials; ++trial) {
    const std::size_t n = pick_n(rng), c = pick_c(rng);
    const double t = thresholds[trial % 3];
    const ScoredDetections d = bench_detections(2024, trial, n, c);
    boxes += d.size();
    const auto fast = sorted(fast_nms_indices(d, t, d.size()));
    const auto seq = sorted(sequential_nms_indices(d, t));
    if (!std::includes(seq.begin(), seq.end(), fast.begin(), fast.end())) ++violations;
    if (fast.size() < seq.size()) ++strict;
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && strict >= 1 && secs < kNmsBudgetSeconds,
          fmt("%zu trials (%zu boxes), subset violations %zu, strict inclusions %zu, %.1f s (budget %.0f s)",
              kNmsTrials, boxes, violations, strict, secs, kNmsBudgetSeconds)};
}

// ---------------------------------------------------------------------------
// Desk-scale run shared by criteria 6 and 2.

fs::path desk_dir(const fs::path& work) { return work / "desk"; }

ModelConfig desk_config() {
  ModelConfig cfg;
  cfg.schedule.iterations = kDeskIterations;
  cfg.schedule.checkpoint_every = 1000;
  return cfg;
}

EvalResult desk_eval(const fs::path& work, EvalMode mode, NmsVariant nms, const std::string& tag) {
  EvalArgs args;
  args.ckpt = checkpoint_path(desk_dir(work) / "run");
  args.data = desk_dir(work) / "test";
  args.out = desk_dir(work) / ("eval_" + tag);
  args.mode = mode;
  args.nms = nms;
  EvalResult result;
  cmd_eval(args, &result);
  return result;
}

// Held-out images where two overlapping gts of one class both get a matched
// detection with mask IoU >= kSeparationIou.
std::size_t separated_images(const EvalResult& mask_result, const std::vector<Sample>& test) {
  std::map<std::pair<std::size_t, int>, double> best;  // (image, gt) -> IoU
  for (const MatchRecord& m : mask_result.matches) {
    if (m.gt < 0 || std::abs(m.threshold - 0.5) > 1e-12) continue;
    auto& v = best[{m.image, m.gt}];
    v = std::max(v, m.iou);
  }
  const auto matched = [&](std::size_t image, std::size_t gt) {
    const auto it = best.find({image, static_cast<int>(gt)});
    return it != best.end() && it->second >= kSeparationIou;
  };
  std::size_t count = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& inst = test[i].instances;
    bool found = false;
    for (std::size_t a = 0; a < inst.size() && !found; ++a) {
      for (std::size_t b = a + 1; b < inst.size() && !found; ++b) {
        if (inst[a].label != inst[b].label || iou(inst[a].box, inst[b].box) <= 0.0) continue;
        found = matched(i, a) && matched(i, b);
      }
    }
    count += found ? 1 : 0;
  }
  return count;
}

// 6. Desk-scale generalization.
Outcome criterion_6(const fs::path& work) {
  const auto t0 = Clock::now();
  const fs::path dir = desk_dir(work);
  fs::remove_all(dir);
  GenerateArgs gen;
  gen.seed = kDeskTrainSeed;
  gen.count = kDeskTrain;
  gen.out = dir / "train";
  const auto train_report = cmd_generate(gen);
  gen.seed = kDeskTestSeed;
  gen.count = kDeskTest;
  gen.out = dir / "test";
  cmd_generate(gen);

  write_config(dir / "config.json", desk_config());
  TrainArgs tr;
  tr.data = dir / "train";
  tr.config = dir / "config.json";
  tr.out = dir / "run";
  tr.seed = kDeskRunSeed;
  tr.quiet = true;
  cmd_train(tr);
  const double train_secs = seconds_since(t0);

  const EvalResult mask = desk_eval(work, EvalMode::mask, NmsVariant::fast, "mask_fast");
  const EvalResult box = desk_eval(work, EvalMode::box, NmsVariant::fast, "box_fast");
  const std::size_t separated = separated_images(mask, load_dataset(dir / "test"));
  const double secs = seconds_since(t0);
  const bool pass = mask.AP50 >= kDeskMaskAp50 && box.AP50 >= mask.AP50 - kDeskBoxSlack && separated >= 1 &&
                    secs <= kDeskBudgetSeconds;
  return {pass, fmt("mask AP50 %.4f (>= %.2f), box AP50 %.4f (>= mask - %.2f), mask mAP %.4f, "
                    "same-class overlaps separated in %zu held-out images, train overlap frequency %.3f, "
                    "%d iterations in %.0f s, total %.0f s",
                    mask.AP50, kDeskMaskAp50, box.AP50, kDeskBoxSlack, mask.mAP, separated,
                    train_report.at("overlap_frequency").get<double>(), kDeskIterations, train_secs, secs)};
}

// 2. Fast vs sequential NMS on the desk checkpoint.
Outcome criterion_2(const fs::path& work) {
  if (!fs::exists(checkpoint_path(desk_dir(work) / "run"))) {
    return {false, "no desk checkpoint; criterion 6 must run first"};
  }
  const EvalResult fast = desk_eval(work, EvalMode::mask, NmsVariant::fast, "mask_fast_c2");
  const EvalResult seq = desk_eval(work, EvalMode::mask, NmsVariant::sequential, "mask_sequential");
  const EvalResult fast_box = desk_eval(work, EvalMode::box, NmsVariant::fast, "box_fast_c2");
  const EvalResult seq_box = desk_eval(work, EvalMode::box, NmsVariant::sequential, "box_sequential");
  const double gap = std::abs(fast.AP50 - seq.AP50);
  return {gap <= kApGapTolerance,
          fmt("mask AP50 fast %.4f vs sequential %.4f, |gap| %.4f (<= %.2f); box AP50 fast %.4f vs "
              "sequential %.4f; mask mAP fast %.4f vs sequential %.4f",
              fast.AP50, seq.AP50, gap, kApGapTolerance, fast_box.AP50, seq_box.AP50, fast.mAP, seq.mAP)};
}

// ---------------------------------------------------------------------------
// 3. Gradient suite.

Outcome criterion_3(const fs::path&) {
  using testing::op_grad_error;
  using testing::random_tensor;
  const auto t0 = Clock::now();
  std::map<std::string, double> worst;
  std::map<std::string, int> instances;
  const auto record = [&](const std::string& op, double err) {
    worst[op] = std::max(worst[op], err);
    ++instances[op];
  };
  std::mt19937_64 rng(3);
  // Inputs bounded away from the ReLU kink.
  const auto away_from_zero = [&](const Shape& s) {
    Tensor<double> t = random_tensor(s, rng, 0.1, 1.0);
    for (double& v : t.values()) v = (rng() & 1) ? v : -v;
    return t;
  };

  for (int i = 0; i < kGradInstances; ++i) {
    Tensor<double> a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
    record("matmul.a", op_grad_error(a, [&](const Tensor<double>& x) { return matmul(x, b); },
                                     [&](const Tensor<double>& r) { return matmul_backward(a, b, r).da; }, rng));
    record("matmul.b", op_grad_error(b, [&](const Tensor<double>& x) { return matmul(a, x); },
                                     [&](const Tensor<double>& r) { return matmul_backward(a, b, r).db; }, rng));

    for (auto [kernel, stride] : {std::pair{3, 1}, std::pair{3, 2}, std::pair{1, 1}}) {
      const std::string tag = fmt("conv%dx%d/s%d", kernel, kernel, stride);
      LayerParams<double> p = LayerParams<double>::conv("c", 2, 3, kernel, stride, rng);
      for (double& v : p.bias.values()) v = 0.1 * static_cast<double>(rng() % 7);
      Tensor<double> x = random_tensor({2, 5, 6}, rng);
      record(tag + ".input", op_grad_error(x, [&](const Tensor<double>& in) { return conv2d(in, p); },
                                           [&](const Tensor<double>& r) {
                                             LayerParams<double> q = p;
                                             return conv2d_backward(x, q, r);
                                           },
                                           rng));
      const Tensor<double> y = conv2d(x, p);
      const Tensor<double> r = random_tensor(y.shape(), rng);
      LayerParams<double> q = p;
      q.weights.clear_grad();
      q.bias.clear_grad();
      conv2d_backward(x, q, r);
      const std::vector<double> dw(q.weights.grad().begin(), q.weights.grad().end());
      const std::vector<double> db(q.bias.grad().begin(), q.bias.grad().end());
      const auto f = [&] { return testing::dot(r, conv2d(x, q)); };
      record(tag + ".weights", grad_check(f, q.weights, dw).max_relative_error);
      record(tag + ".bias", grad_check(f, q.bias, db).max_relative_error);
    }

    for (auto [kind, name] : {std::pair{Activation::relu, "relu"}, std::pair{Activation::tanh, "tanh"},
                              std::pair{Activation::sigmoid, "sigmoid"}}) {
      Tensor<double> x = away_from_zero({2, 3, 4});
      const Activation k = kind;
      record(name, op_grad_error(x, [&](const Tensor<double>& in) { return activation(in, k); },
                                 [&](const Tensor<double>& r) { return activation_backward(activation(x, k), r, k); },
                                 rng));
    }
    Tensor<double> logits = random_tensor({4, 5}, rng, -3, 3);
    record("softmax", op_grad_error(logits, [&](const Tensor<double>& in) { return softmax_rows(in); },
                                    [&](const Tensor<double>& r) { return softmax_rows_backward(softmax_rows(logits), r); },
                                    rng));
    Tensor<double> map = random_tensor({2, 3, 4}, rng);
    record("upsample_x2", op_grad_error(map, [&](const Tensor<double>& in) { return upsample_bilinear_x2(in); },
                                        [&](const Tensor<double>& r) { return upsample_bilinear_x2_backward(r, 3, 4); },
                                        rng));
    const Tensor<double> other = random_tensor({2, 3, 4}, rng);
    record("add", op_grad_error(map, [&](const Tensor<double>& in) { return add(in, other); },
                                [&](const Tensor<double>& r) { return r; }, rng));
    Tensor<double> big = random_tensor({2, 5, 5}, rng);
    record("crop_spatial", op_grad_error(big, [&](const Tensor<double>& in) { return crop_spatial(in, 4, 3); },
                                         [&](const Tensor<double>& r) { return crop_spatial_backward(r, 5, 5); }, rng));
    Tensor<double> head = random_tensor({6, 2, 3}, rng);
    record("channels_to_rows",
           op_grad_error(head, [&](const Tensor<double>& in) { return channels_to_rows(in, 3); },
                         [&](const Tensor<double>& r) { return rows_to_channels(r, 3, 2, 3); }, rng));
    record("chw_to_hwc", op_grad_error(head, [&](const Tensor<double>& in) { return chw_to_hwc(in); },
                                       [&](const Tensor<double>& r) { return hwc_to_chw(r); }, rng));

    Tensor<double> protos = random_tensor({4, 5, 3}, rng, 0, 2), coeffs = random_tensor({2, 3}, rng);
    record("assemble.prototypes",
           op_grad_error(protos, [&](const Tensor<double>& in) { return assemble(in, coeffs); },
                         [&](const Tensor<double>& r) {
                           return assemble_backward(protos, coeffs, assemble(protos, coeffs), r).prototypes;
                         },
                         rng));
    record("assemble.coeffs",
           op_grad_error(coeffs, [&](const Tensor<double>& in) { return assemble(protos, in); },
                         [&](const Tensor<double>& r) {
                           return assemble_backward(protos, coeffs, assemble(protos, coeffs), r).coeffs;
                         },
                         rng));

    MatchResult match;
    for (int a = 0; a < 12; ++a) match.anchors.push_back({MatchKind::negative, -1, 0.0});
    match.anchors[1] = {MatchKind::positive, 0, 0.7};
    match.anchors[6] = {MatchKind::positive, 1, 0.6};
    match.anchors[3].kind = MatchKind::ignored;
    const std::vector<int> labels = {2, 0};
    Tensor<double> cls = random_tensor({12, 4}, rng, -2, 2);
    const auto cls_loss = classification_loss_ohem(cls, match, labels);
    record("loss.classification_ohem",
           grad_check([&] { return classification_loss_ohem(cls, match, labels).value; }, cls, cls_loss.grad.data())
               .max_relative_error);
    Tensor<double> pred = random_tensor({5, 4}, rng, -3, 3);
    const Tensor<double> target = random_tensor({5, 4}, rng, -3, 3);
    record("loss.box_smooth_l1",
           grad_check([&] { return box_loss(pred, target).value; }, pred, box_loss(pred, target).grad.data())
               .max_relative_error);
    Tensor<double> soft = random_tensor({3, 6, 6}, rng, 0.05, 0.95);
    Tensor<double> mask_t({3, 6, 6});
    for (double& v : mask_t.values()) v = (rng() & 1) ? 1.0 : 0.0;
    const std::vector<Box> gt_boxes = {{0.1, 0.0, 0.7, 0.5}, {0.0, 0.0, 1.0, 1.0}, {0.5, 0.5, 0.9, 0.95}};
    record("loss.mask_bce",
           grad_check([&] { return mask_loss(soft, mask_t, gt_boxes).value; }, soft,
                      mask_loss(soft, mask_t, gt_boxes).grad.data())
               .max_relative_error);
    Tensor<double> seg = random_tensor({2, 3, 3}, rng, -4, 4);
    Tensor<double> seg_t({2, 3, 3});
    for (double& v : seg_t.values()) v = (rng() & 1) ? 1.0 : 0.0;
    record("loss.semantic_bce",
           grad_check([&] { return semantic_loss(seg, seg_t).value; }, seg, semantic_loss(seg, seg_t).grad.data())
               .max_relative_error);
  }

  // End to end: sampled coordinates of every parameter tensor of a small
  // network, with biases moved off their zero initialization.
  Model<double> model(testing::tiny_config(), 7);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  for (LayerParams<double>* p : model.parameters()) {
    for (double& v : p->bias.values()) v = jitter(rng);
  }
  for (int i = 0; i < kGradInstances; ++i) {
    const Sample s = generate_sample(100 + static_cast<std::uint64_t>(i), 0, testing::tiny_generator());
    model.zero_grad();
    loss_and_backward(model, s);
    const auto f = [&] { return sample_total_loss(model, s).total; };
    double err = 0.0;
    for (LayerParams<double>* p : model.parameters()) {
      for (Tensor<double>* t : {&p->weights, &p->bias}) {
        const std::vector<double> analytic(t->grad().begin(), t->grad().end());
        err = std::max(err, grad_check(f, *t, analytic, {1e-6, 4, static_cast<std::uint64_t>(i)}).max_relative_error);
      }
    }
    record("total_loss end-to-end", err);
  }

  double overall = 0.0;
  std::string worst_op;
  int min_instances = kGradInstances;
  for (const auto& [op, err] : worst) {
    if (err >= overall) {
      overall = err;
      worst_op = op;
    }
    min_instances = std::min(min_instances, instances[op]);
  }
  const double secs = seconds_since(t0);
  return {overall <= kGradTolerance && min_instances >= kGradInstances && secs < kGradBudgetSeconds,
          fmt("%zu operations x %d instances, max relative error %.2e (%s) <= %.0e, %.1f s", worst.size(),
              min_instances, overall, worst_op.c_str(), kGradTolerance, secs)};
}

// ---------------------------------------------------------------------------
// 4. Assembly against the per-instance loop.

Tensor<double> loop_assemble(const Tensor<double>& p, const Tensor<double>& c) {
  const std::size_t h = p.dim(0), w = p.dim(1), k = p.dim(2), n = c.dim(0);
  Tensor<double> m({n, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0;
        for (std::size_t j = 0; j < k; ++j) s += c.at(i, j) * p.at(y, x, j);
        m.at(i, y, x) = 1.0 / (1.0 + std::exp(-s));
      }
    }
  }
  return m;
}

Outcome criterion_4(const fs::path&) {
  double worst = 0.0;
  // Worked example: P(.,.,0) = [[1,0],[0,1]], P(.,.,1) = [[0,2],[2,0]], C = [[1,-1]].
  Tensor<double> p({2, 2, 2});
  p.at(0, 0, 0) = p.at(1, 1, 0) = 1;
  p.at(0, 1, 1) = p.at(1, 0, 1) = 2;
  const Tensor<double> c({1, 2}, std::vector<double>{1, -1});
  const Tensor<double> m = assemble(p, c);
  const double hi = 1.0 / (1.0 + std::exp(-1.0)), lo = 1.0 / (1.0 + std::exp(2.0));
  const double expected[] = {hi, lo, lo, hi};
  for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, std::abs(m[i] - expected[i]));
  const bool rounded = std::abs(m[0] - 0.7311) < 5e-5 && std::abs(m[1] - 0.1192) < 5e-5;

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> side(1, 40), kdim(1, 32), ndim(1, 12);
  for (std::size_t pair = 0; pair < kAssemblyPairs; ++pair) {
    const std::size_t h = side(rng), w = side(rng), k = kdim(rng), n = ndim(rng);
    const Tensor<double> protos = testing::random_tensor({h, w, k}, rng, 0, 3);
    const Tensor<double> coeffs = testing::random_tensor({n, k}, rng);
    const Tensor<double> a = assemble(protos, coeffs), b = loop_assemble(protos, coeffs);
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return {worst <= kAssemblyTolerance && rounded,
          fmt("worked 2x2 example [[%.4f, %.4f], [%.4f, %.4f]] and %zu random pairs, max abs difference %.2e "
              "(<= %.0e)",
              m[0], m[1], m[2], m[3], kAssemblyPairs, worst, kAssemblyTolerance)};
}

// ---------------------------------------------------------------------------
// 5. Overfit a handful of samples.

Outcome criterion_5(const fs::path& work) {
  const auto t0 = Clock::now();
  const fs::path dir = work / "overfit";
  fs::remove_all(dir);
  GenerateArgs gen;
  gen.seed = 1;
  gen.count = kOverfitSamples;
  gen.out = dir / "data";
  cmd_generate(gen);
  ModelConfig cfg;
  cfg.schedule.iterations = kOverfitIterations;
  write_config(dir / "config.json", cfg);
  TrainArgs tr;
  tr.data = gen.out;
  tr.config = dir / "config.json";
  tr.out = dir / "run";
  tr.seed = 1;
  tr.quiet = true;
  cmd_train(tr);
  const double train_secs = seconds_since(t0);

  std::ifstream log(dir / "run" / "train_log.jsonl");
  std::string first_line;
  std::getline(log, first_line);
  const double first = nlohmann::json::parse(first_line).at("total").get<double>();
  const TrainingCheckpoint ckpt = load_training_checkpoint(checkpoint_path(dir / "run"));
  const auto samples = load_dataset(gen.out);
  double final_loss = 0.0;
  for (const Sample& s : samples) final_loss += sample_total_loss(ckpt.model, s).total;
  final_loss /= static_cast<double>(samples.size());
  const double drop = 1.0 - final_loss / first;

  EvalArgs ev;
  ev.ckpt = checkpoint_path(dir / "run");
  ev.data = gen.out;
  ev.out = dir / "eval";
  const auto report = cmd_eval(ev);
  const double ap50 = report.at("AP50").get<double>();
  const double secs = seconds_since(t0);
  return {ap50 >= kOverfitMaskAp50 && drop >= kOverfitLossDrop && secs <= kOverfitBudgetSeconds,
          fmt("mask AP50 %.4f (>= %.2f) on the %d training samples, total loss %.3f at iteration 1 -> %.3f "
              "mean after %d iterations (drop %.1f%%, >= %.0f%%), train %.0f s, total %.0f s",
              ap50, kOverfitMaskAp50, kOverfitSamples, first, final_loss, kOverfitIterations, 100 * drop,
              100 * kOverfitLossDrop, train_secs, secs)};
}

// ---------------------------------------------------------------------------
// 7. Average precision against brute-force enumeration.

Outcome criterion_7(const fs::path&) {
  double worst = 0.0;
  std::size_t cases = 0, pipeline_cases = 0;
  bool empty_ok = true;
  for (std::size_t len = 0; len <= 6; ++len) {
    for (unsigned bits = 0; bits < (1u << len); ++bits) {
      std::vector<bool> tp(len);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < len; ++i) hits += (tp[i] = ((bits >> i) & 1u) != 0) ? 1 : 0;
      auto flags = std::make_unique<bool[]>(len + 1);
      for (std::size_t i = 0; i < len; ++i) flags[i] = tp[i];
      const std::span<const bool> span(flags.get(), len);
      for (std::size_t n_gt = hits; n_gt <= 3; ++n_gt) {
        ++cases;
        const auto ap = average_precision(span, n_gt);
        if (n_gt == 0) {
          // No ground truth: undefined without detections, zero with any.
          empty_ok = empty_ok && (len == 0 ? !ap.has_value() : (ap.has_value() && *ap == 0.0));
          continue;
        }
        worst = std::max(worst, std::abs(ap.value() - testing::brute_force_ap(tp, n_gt)));

        // The same ranking through the full evaluator: true positives copy an
        // unmatched gt box, false positives sit in empty space.
        EvalImage image;
        for (std::size_t g = 0; g < n_gt; ++g) {
          Instance inst;
          inst.label = 0;
          inst.box = {0.1 * static_cast<double>(g), 0.0, 0.1 * static_cast<double>(g) + 0.05, 0.05};
          image.ground_truth.push_back(inst);
        }
        std::size_t next_gt = 0;
        for (std::size_t i = 0; i < len; ++i) {
          const Box box = tp[i] ? image.ground_truth[next_gt++].box
                                : Box{0.5, 0.1 * static_cast<double>(i), 0.55, 0.1 * static_cast<double>(i) + 0.05};
          image.detections.push_back({0, 1.0 - 0.1 * static_cast<double>(i), box, Tensor<double>()});
        }
        const std::vector<EvalImage> images = {image};
        const EvalResult r = evaluate(images, {"shape"}, EvalMode::box);
        worst = std::max(worst, std::abs(r.ap[0][0].value() - testing::brute_force_ap(tp, n_gt)));
        ++pipeline_cases;
      }
    }
  }
  return {worst <= kApOracleTolerance && empty_ok,
          fmt("%zu rankings (<= 6 detections, <= 3 gts), %zu also through evaluate(), max |AP - brute force| "
              "%.2e (<= %.0e), empty-gt cases %s",
              cases, pipeline_cases, worst, kApOracleTolerance, empty_ok ? "ok" : "wrong")};
}

// ---------------------------------------------------------------------------
// 8. Mask loss normalization.

Outcome criterion_8(const fs::path&) {
  const std::size_t g = 32;
  const double p = 0.3;
  const Tensor<double> soft({1, g, g}, p);
  const Tensor<double> targets({1, g, g}, 1.0);
  const double expected = -std::log(p);
  std::vector<double> values;
  std::string listing;
  for (int area : {4, 16, 64, 256}) {
    const int side = static_cast<int>(std::lround(std::sqrt(area)));
    // A square and a 1:4 rectangle of the same area, both on pixel edges.
    for (auto [w, h] : {std::pair{side, side}, std::pair{side / 2, side * 2}}) {
      const double x0 = 3.0 / g, y0 = 0.0;
      const std::vector<Box> boxes = {{x0, y0, x0 + w / static_cast<double>(g), y0 + h / static_cast<double>(g)}};
      values.push_back(mask_loss(soft, targets, boxes).value);
      listing += fmt("%s%dx%d:%.12f", listing.empty() ? "" : ", ", w, h, values.back());
    }
  }
  double spread = 0.0;
  for (double v : values) spread = std::max(spread, std::abs(v - expected));
  return {spread <= kMaskLossTolerance,
          fmt("areas {4,16,64,256} px: %s; max deviation from -ln(%.1f) = %.2e (<= %.0e)", listing.c_str(), p,
              spread, kMaskLossTolerance)};
}

// ---------------------------------------------------------------------------
// 9. Benchmark reports.

Outcome criterion_9(const fs::path& work) {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string listing;
  const char* keys[] = {"variant", "n", "c", "trials", "iou_threshold", "mean_ms", "p50_ms", "p95_ms",
                        "kept_mean", "divergence_rate", "fast", "sequential"};
  for (std::size_t n : {100, 1000}) {
    for (std::size_t c : {8, 80}) {
      BenchArgs args;
      args.n = n;
      args.c = c;
      args.trials = kBenchTrials;
      args.seed = 9;
      args.out = work / "bench" / fmt("n%zu_c%zu", n, c);
      fs::remove_all(args.out);
      const nlohmann::json returned = cmd_bench_nms(args);
      const nlohmann::json report = read_json(args.out / "bench_nms.json");
      const nlohmann::json trials = read_json(args.out / "trials.json");
      bool valid = report == returned;
      for (const char* k : keys) valid = valid && report.contains(k);
      for (const char* k : {"mean_ms", "p50_ms", "p95_ms"}) {
        valid = valid && report.at(k).is_number() && std::isfinite(report.at(k).get<double>()) &&
                report.at(k).get<double>() >= 0.0;
      }
      // Recount divergence from the stored kept sets.
      std::size_t differ = 0, not_subset = 0;
      for (const auto& t : trials.at("trials")) {
        std::set<std::size_t> f, s;
        for (const auto& v : t.at("fast")) f.insert(v.get<std::size_t>());
        for (const auto& v : t.at("sequential")) s.insert(v.get<std::size_t>());
        differ += f != s ? 1 : 0;
        not_subset += std::includes(s.begin(), s.end(), f.begin(), f.end()) ? 0 : 1;
      }
      const double rate = report.at("divergence_rate").get<double>();
      const double recount = static_cast<double>(differ) / static_cast<double>(trials.at("trials").size());
      valid = valid && trials.at("trials").size() == kBenchTrials && rate == recount &&
              rate == audit_divergence_rate(trials) && not_subset == 0;
      ok = ok && valid;
      listing += fmt("%s(n=%zu,c=%zu: fast %.2f ms, seq %.2f ms, divergence %.2f%s)", listing.empty() ? "" : " ", n,
                     c, report.at("fast").at("mean_ms").get<double>(),
                     report.at("sequential").at("mean_ms").get<double>(), rate, valid ? "" : ", INVALID");
    }
  }
  return {ok, fmt("%s; audits match stored kept sets; %.0f s", listing.c_str(), seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// 10. Geometry constants for the 550 px configuration.

Outcome criterion_10(const fs::path&) {
  const int size = 550;
  const std::vector<int> strides = {8, 16, 32, 64, 128};
  const std::vector<double> scales = {24, 48, 96, 192, 384};
  const std::vector<double> ratios = {1.0, 0.5, 2.0};
  const AnchorGrid grid = generate_anchors(size, strides, scales, ratios);
  bool ok = grid.scales() == scales && grid.aspect_ratios() == ratios;
  const int expected_grid[] = {69, 35, 18, 9, 5};
  std::size_t expected_count = 0;
  for (std::size_t l = 0; l < 5; ++l) {
    ok = ok && grid.levels()[l].grid_h == expected_grid[l] && grid.levels()[l].grid_w == expected_grid[l];
    expected_count += static_cast<std::size_t>(expected_grid[l] * expected_grid[l]) * 3;
  }
  ok = ok && grid.size() == expected_count;
  // Every anchor: centered on its cell, area scale^2, width/height = ratio.
  double worst = 0.0;
  std::size_t idx = 0;
  for (std::size_t l = 0; l < 5 && ok; ++l) {
    const double s = strides[l];
    for (int i = 0; i < expected_grid[l]; ++i) {
      for (int j = 0; j < expected_grid[l]; ++j) {
        for (double r : ratios) {
          const Box& a = grid[idx++];
          const double w = a.width() * size, h = a.height() * size;
          worst = std::max({worst, std::abs(a.center_x() * size - (j + 0.5) * s),
                            std::abs(a.center_y() * size - (i + 0.5) * s), std::abs(w * h - scales[l] * scales[l]) / (scales[l] * scales[l]),
                            std::abs(w / h - r)});
        }
      }
    }
  }
  ok = ok && worst < 1e-9;
  const int proto = prototype_grid_size(size);
  ok = ok && proto == 138 && ModelConfig{}.prototype_size() == ModelConfig{}.input_size / 4;
  return {ok, fmt("550 px: grids 69/35/18/9/5, scales [24,48,96,192,384], ratios [1,1/2,2], %zu anchors "
                  "(expected %zu), max geometry error %.1e; prototype grid %d (expected 138); desk 128 -> %d",
                  grid.size(), expected_count, worst, proto, ModelConfig{}.prototype_size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Outcome(const fs::path&)>> criteria = {
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4},  {5, criterion_5},
      {6, criterion_6}, {7, criterion_7}, {8, criterion_8}, {9, criterion_9}, {10, criterion_10}};
  fs::path work = fs::temp_directory_path() / "protomask_acceptance";
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--workdir" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "all") {
      for (const auto& [n, fn] : criteria) selected.push_back(n);
    } else {
      try {
        const int n = std::stoi(arg);
        if (!criteria.contains(n)) throw std::out_of_range(arg);
        selected.push_back(n);
      } catch (const std::exception&) {
        std::cerr << "usage: acceptance [1-10 | all ...] [--workdir DIR]\n";
        return 2;
      }
    }
  }
  if (selected.empty()) {
    // Criterion 2 reads the checkpoint criterion 6 trains.
    selected = {1, 3, 4, 5, 6, 2, 7, 8, 9, 10};
  }
  fs::create_directories(work);
  int failures = 0;
  for (int n : selected) {
    Outcome o;
    try {
      o = criteria.at(n)(work);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
