// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/eval.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include "protomask/errors.hpp"

namespace protomask {

std::string to_string(EvalMode mode) { return mode == EvalMode::mask ? "mask" : "box"; }

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "mask") return EvalMode::mask;
  if (s == "box") return EvalMode::box;
  throw ConfigError("unknown eval mode '" + s + "' (expected mask or box)");
}

double mask_iou(const Tensor<double>& a, const Tensor<double>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mask_iou shapes differ: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0.0, y = b[i] != 0.0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::vector<int> match_detections(std::span<const double> iou, std::size_t n_dets, std::size_t n_gts,
                                  double iou_threshold) {
  if (iou.size() != n_dets * n_gts) throw DimensionError("IoU matrix size does not match dets x gts");
  std::vector<int> matched(n_dets, -1);
  std::vector<bool> taken(n_gts, false);
  for (std::size_t d = 0; d < n_dets; ++d) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < n_gts; ++g) {
      const double v = iou[d * n_gts + g];
      if (taken[g] || v < iou_threshold) continue;
      if (best < 0 || v > best_iou) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      matched[d] = best;
    }
  }
  return matched;
}

std::optional<double> average_precision(std::span<const bool> tp, std::size_t n_gt) {
  if (n_gt == 0) {
    if (tp.empty()) return std::nullopt;
    return 0.0;
  }
  const std::size_t n = tp.size();
  std::vector<double> recall(n), precision(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hits += tp[i] ? 1 : 0;
    recall[i] = static_cast<double>(hits) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0;
  std::size_t i = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    while (i < n && recall[i] < r) ++i;
    if (i == n) break;
    sum += precision[i];
  }
  return sum / 101.0;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back((50 + 5 * k) / 100.0);
  return t;
}

EvalResult evaluate(std::span<const EvalImage> images, const std::vector<std::string>& class_names, EvalMode mode) {
  EvalResult result;
  result.mode = mode;
  result.class_names = class_names;
  result.thresholds = coco_iou_thresholds();
  result.n_images = images.size();
  const std::size_t nc = class_names.size();
  const std::size_t nt = result.thresholds.size();

  // Per (image, class): IoU matrices between that class's dets (score order) and gts.
  struct Cell {
    std::vector<std::size_t> dets, gts;
    std::vector<double> iou;
  };
  std::vector<std::vector<Cell>> cells(images.size(), std::vector<Cell>(nc));
  for (std::size_t im = 0; im < images.size(); ++im) {
    const auto& img = images[im];
    for (std::size_t d = 0; d < img.detections.size(); ++d) {
      const int l = img.detections[d].label;
      if (l < 0 || static_cast<std::size_t>(l) >= nc) throw ValidationError("detection label out of range");
      cells[im][static_cast<std::size_t>(l)].dets.push_back(d);
    }
    for (std::size_t g = 0; g < img.ground_truth.size(); ++g) {
      const int l = img.ground_truth[g].label;
      if (l < 0 || static_cast<std::size_t>(l) >= nc) throw ValidationError("ground-truth label out of range");
      cells[im][static_cast<std::size_t>(l)].gts.push_back(g);
    }
    for (auto& cell : cells[im]) {
      std::stable_sort(cell.dets.begin(), cell.dets.end(), [&](std::size_t a, std::size_t b) {
        return img.detections[a].score > img.detections[b].score;
      });
      for (std::size_t d : cell.dets) {
        for (std::size_t g : cell.gts) {
          const auto& det = img.detections[d];
          const auto& gt = img.ground_truth[g];
          cell.iou.push_back(mode == EvalMode::mask ? mask_iou(det.mask, gt.mask) : iou(det.box, gt.box));
        }
      }
    }
  }

  result.ap.assign(nc, std::vector<std::optional<double>>(nt));
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t t = 0; t < nt; ++t) {
      struct Scored {
        double score;
        bool tp;
      };
      std::vector<Scored> scored;
      std::size_t n_gt = 0;
      for (std::size_t im = 0; im < images.size(); ++im) {
        const Cell& cell = cells[im][c];
        n_gt += cell.gts.size();
        const auto m = match_detections(cell.iou, cell.dets.size(), cell.gts.size(), result.thresholds[t]);
        for (std::size_t k = 0; k < cell.dets.size(); ++k) {
          const auto& det = images[im].detections[cell.dets[k]];
          MatchRecord rec;
          rec.image = im;
          rec.detection = cell.dets[k];
          rec.label = static_cast<int>(c);
          rec.score = det.score;
          rec.threshold = result.thresholds[t];
          if (m[k] >= 0) {
            rec.gt = static_cast<int>(cell.gts[static_cast<std::size_t>(m[k])]);
            rec.iou = cell.iou[k * cell.gts.size() + static_cast<std::size_t>(m[k])];
          }
          result.matches.push_back(rec);
          scored.push_back({det.score, m[k] >= 0});
        }
      }
      std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
      // std::vector<bool> is not contiguous, so stage the flags in a plain array.
      auto flags = std::make_unique<bool[]>(scored.size());
      for (std::size_t i = 0; i < scored.size(); ++i) flags[i] = scored[i].tp;
      result.ap[c][t] = average_precision(std::span<const bool>(flags.get(), scored.size()), n_gt);
    }
  }

  const auto mean_over_classes = [&](auto value_of) {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < nc; ++c) {
      if (!result.ap[c][0]) continue;
      sum += value_of(c);
      ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
  };
  result.AP50 = mean_over_classes([&](std::size_t c) { return *result.ap[c][0]; });
  result.AP75 = mean_over_classes([&](std::size_t c) { return *result.ap[c][5]; });
  result.mAP = mean_over_classes([&](std::size_t c) {
    double s = 0;
    for (std::size_t t = 0; t < nt; ++t) s += *result.ap[c][t];
    return s / static_cast<double>(nt);
  });
  return result;
}

nlohmann::json EvalResult::to_json() const {
  nlohmann::json classes = nlohmann::json::object();
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    nlohmann::json entry;
    if (!ap[c][0]) {
      entry = {{"AP", nullptr}, {"AP50", nullptr}, {"AP75", nullptr}, {"per_threshold", nullptr}};
    } else {
      double s = 0;
      nlohmann::json per = nlohmann::json::array();
      for (const auto& v : ap[c]) {
        s += *v;
        per.push_back(*v);
      }
      entry = {{"AP", s / static_cast<double>(ap[c].size())}, {"AP50", *ap[c][0]}, {"AP75", *ap[c][5]},
               {"per_threshold", per}};
    }
    classes[class_names[c]] = entry;
  }
  return {{"classes", classes}, {"mAP", mAP}, {"AP50", AP50}, {"AP75", AP75}, {"n_images", n_images},
          {"mode", to_string(mode)}, {"thresholds", thresholds}};
}

}  // namespace protomask
