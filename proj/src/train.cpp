// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "protomask/assembly.hpp"
#include "protomask/errors.hpp"
#include "protomask/optim.hpp"

namespace protomask {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

SampleLoss sample_loss(const Model<double>& model, const NetworkOutputs<double>& out, const Sample& sample,
                       bool with_grads) {
  const ModelConfig& cfg = model.config();
  const AnchorGrid& anchors = model.anchors();
  if (!out.seg_logits) throw StateError("sample_loss needs a training-mode forward pass");
  const std::vector<Box> gt_boxes = sample.boxes();
  const std::vector<int> gt_labels = sample.labels();
  const MatchResult match = match_anchors(anchors, gt_boxes, cfg.match);
  const std::vector<std::size_t> pos = match.positives();
  const std::size_t npos = pos.size();
  const std::size_t k = out.coeffs.dim(1);
  const std::size_t ph = out.prototypes.dim(0), pw = out.prototypes.dim(1);
  const LossWeights& w = cfg.loss_weights;

  SampleLoss result;
  LossParts parts;

  const ClassificationLoss cls = classification_loss_ohem(out.class_logits, match, gt_labels, cfg.ohem_ratio);
  parts.cls = cls.value;

  RegressionLoss box;
  MaskLoss mask;
  Tensor<double> pos_coeffs, soft;
  if (npos > 0) {
    Tensor<double> pred({npos, 4}), target({npos, 4});
    pos_coeffs = Tensor<double>({npos, k});
    Tensor<double> targets({npos, ph, pw});
    std::vector<Box> pos_boxes;
    // Mask targets are shared between anchors matched to the same gt.
    std::vector<Tensor<double>> small(gt_boxes.size());
    for (std::size_t i = 0; i < npos; ++i) {
      const std::size_t a = pos[i];
      const auto g = static_cast<std::size_t>(match.anchors[a].gt);
      const BoxDeltas t = encode_box(gt_boxes[g], anchors[a], cfg.variances);
      for (std::size_t j = 0; j < 4; ++j) {
        pred.at(i, j) = out.box_deltas.at(a, j);
        target.at(i, j) = t[j];
      }
      for (std::size_t j = 0; j < k; ++j) pos_coeffs.at(i, j) = out.coeffs.at(a, j);
      if (small[g].empty()) small[g] = downsample_mask_area(sample.instances[g].mask, ph, pw);
      std::copy(small[g].data().begin(), small[g].data().end(), targets.data().begin() + static_cast<std::ptrdiff_t>(i * ph * pw));
      pos_boxes.push_back(gt_boxes[g]);
    }
    box = box_loss(pred, target);
    soft = assemble(out.prototypes, pos_coeffs);
    mask = mask_loss(soft, targets, pos_boxes);
    parts.box = box.value;
    parts.mask = mask.value;
  }

  std::vector<Tensor<double>> gt_masks;
  for (const auto& inst : sample.instances) gt_masks.push_back(inst.mask);
  const Tensor<double>& seg = *out.seg_logits;
  const Tensor<double> seg_targets = semantic_targets(gt_masks, gt_labels, static_cast<std::size_t>(cfg.num_classes),
                                                      seg.dim(1), seg.dim(2));
  const RegressionLoss sem = semantic_loss(seg, seg_targets);
  parts.semantic = sem.value;

  result.breakdown = total_loss(parts, w);
  result.breakdown.positives = npos;
  result.breakdown.negatives = cls.hard_negatives.size();
  if (!with_grads) return result;

  OutputGrads<double>& g = result.grads;
  g.class_logits = cls.grad;
  for (double& v : g.class_logits.values()) v *= w.cls;
  g.seg_logits = sem.grad;
  for (double& v : g.seg_logits.values()) v *= w.semantic;
  if (npos > 0) {
    g.box_deltas = Tensor<double>(out.box_deltas.shape());
    g.coeffs = Tensor<double>(out.coeffs.shape());
    Tensor<double> dsoft = mask.grad;
    for (double& v : dsoft.values()) v *= w.mask;
    const AssembleGrads<double> ag = assemble_backward(out.prototypes, pos_coeffs, soft, dsoft);
    g.prototypes = ag.prototypes;
    for (std::size_t i = 0; i < npos; ++i) {
      const std::size_t a = pos[i];
      for (std::size_t j = 0; j < 4; ++j) g.box_deltas.at(a, j) = w.box * box.grad.at(i, j);
      for (std::size_t j = 0; j < k; ++j) g.coeffs.at(a, j) = ag.coeffs.at(i, j);
    }
  }
  return result;
}

LossBreakdown loss_and_backward(Model<double>& model, const Sample& sample) {
  ForwardCache<double> cache;
  const NetworkOutputs<double> out = model.forward(sample.image, true, &cache);
  SampleLoss loss = sample_loss(model, out, sample, true);
  model.backward(cache, loss.grads);
  return loss.breakdown;
}

LossBreakdown sample_total_loss(const Model<double>& model, const Sample& sample) {
  const NetworkOutputs<double> out = model.forward(sample.image, true);
  return sample_loss(model, out, sample, false).breakdown;
}

nlohmann::json TrainLogEntry::to_json() const {
  return {{"iter", iteration},       {"sample", sample},       {"flipped", flipped},
          {"lr", learning_rate},     {"cls", loss.cls},        {"box", loss.box},
          {"mask", loss.mask},       {"semantic", loss.semantic}, {"total", loss.total},
          {"positives", loss.positives}};
}

std::size_t sample_for_iteration(std::uint64_t seed, std::size_t n_samples, int iteration) {
  if (n_samples == 0) throw ConfigError("training set is empty");
  const auto epoch = static_cast<std::uint64_t>(iteration) / n_samples;
  const auto pos = static_cast<std::size_t>(static_cast<std::uint64_t>(iteration) % n_samples);
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix(mix(seed) ^ (0x5A17ull + epoch)));
  // Fisher-Yates with raw draws so the permutation does not depend on the
  // standard library's distribution implementation.
  for (std::size_t i = n_samples; i-- > 1;) {
    std::swap(order[i], order[static_cast<std::size_t>(rng() % (i + 1))]);
  }
  return order[pos];
}

bool flip_for_iteration(std::uint64_t seed, int iteration, double probability) {
  const std::uint64_t r = mix(mix(seed ^ 0xF11Bull) ^ static_cast<std::uint64_t>(iteration));
  return static_cast<double>(r >> 11) * 0x1.0p-53 < probability;
}

fs::path checkpoint_path(const fs::path& out_dir) { return out_dir / "checkpoint.ptck"; }

void save_training_checkpoint(const fs::path& path, const Model<double>& model, int iteration) {
  save_checkpoint(path, model_to_checkpoint(model, {{"iteration", iteration}}));
}

TrainingCheckpoint load_training_checkpoint(const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  int iteration = 0;
  if (ckpt.meta.contains("iteration")) {
    if (!ckpt.meta["iteration"].is_number_integer()) throw FormatError("checkpoint meta field 'iteration' must be an integer");
    iteration = ckpt.meta["iteration"].get<int>();
  }
  return {model_from_checkpoint<double>(ckpt), iteration};
}

namespace {

void clip_gradients(std::span<LayerParams<double>*> params, double max_norm) {
  double sq = 0;
  for (auto* p : params) {
    for (double g : p->weights.grad()) sq += g * g;
    for (double g : p->bias.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double scale = max_norm / norm;
  for (auto* p : params) {
    for (double& g : p->weights.grad()) g *= scale;
    for (double& g : p->bias.grad()) g *= scale;
  }
}

}  // namespace

namespace {

// Drops entries past the checkpoint a run resumes from, so the log of a
// resumed run matches an uninterrupted one.
void trim_log(const fs::path& path, int keep_through) {
  std::ifstream in(path);
  if (!in) return;
  std::vector<std::string> kept;
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("iter") || !j["iter"].is_number_integer()) {
      throw FormatError("training log " + path.string() + ": malformed line " + std::to_string(kept.size() + 1));
    }
    if (j["iter"].get<int>() > keep_through) break;
    kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& line : kept) out << line << '\n';
  if (!out) throw IoError("cannot rewrite training log " + path.string());
}

}  // namespace

TrainResult train(Model<double>& model, std::span<const Sample> samples, int start_iteration,
                  const TrainOptions& options) {
  const TrainSchedule& sch = model.config().schedule;
  if (samples.empty()) throw ConfigError("training set is empty");
  if (start_iteration < 0 || start_iteration > sch.iterations) {
    throw ConfigError("start iteration " + std::to_string(start_iteration) + " outside [0, " +
                      std::to_string(sch.iterations) + "]");
  }
  std::ofstream log;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    if (start_iteration > 0) trim_log(options.out_dir / "train_log.jsonl", start_iteration);
    log.open(options.out_dir / "train_log.jsonl", start_iteration > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot open training log in " + options.out_dir.string());
  }

  TrainResult result;
  result.final_iteration = start_iteration;
  model.zero_grad();
  for (int it = start_iteration; it < sch.iterations; ++it) {
    TrainLogEntry entry;
    entry.iteration = it + 1;
    entry.sample = sample_for_iteration(sch.seed, samples.size(), it);
    entry.flipped = flip_for_iteration(sch.seed, it, sch.flip_probability);
    entry.learning_rate = sch.learning_rate_at(it);
    try {
      const Sample& base = samples[entry.sample];
      entry.loss = entry.flipped ? loss_and_backward(model, base.flipped_horizontally())
                                 : loss_and_backward(model, base);
    } catch (const NumericError& e) {
      if (log) log << nlohmann::json{{"iter", it + 1}, {"error", e.what()}}.dump() << '\n';
      throw NumericError("training diverged at iteration " + std::to_string(it + 1) + ": " + e.what() +
                         "; last good checkpoint is iteration " + std::to_string(result.final_iteration));
    }
    auto params = model.parameters();
    if (sch.grad_clip > 0) clip_gradients(params, sch.grad_clip);
    sgd_step(std::span<LayerParams<double>*>(params),
             SgdSettings{entry.learning_rate, sch.momentum, sch.weight_decay});
    ++result.iterations_run;
    if (log) log << entry.to_json().dump() << '\n';
    if (options.on_iteration) options.on_iteration(entry);
    result.log.push_back(entry);
    const bool last = it + 1 == sch.iterations;
    if (!options.out_dir.empty() && (last || (sch.checkpoint_every > 0 && (it + 1) % sch.checkpoint_every == 0))) {
      log.flush();
      save_training_checkpoint(checkpoint_path(options.out_dir), model, it + 1);
      result.final_iteration = it + 1;
    }
  }
  result.final_iteration = sch.iterations;
  return result;
}

}  // namespace protomask
