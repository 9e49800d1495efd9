// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace protomask {

namespace {

double log_sum_exp(const double* row, std::size_t n) {
  const double peak = *std::max_element(row, row + n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::exp(row[i] - peak);
  return peak + std::log(total);
}

// Source index range [begin, end) covered by destination cell i when
// mapping `src` cells onto `dst` cells.
std::pair<std::size_t, std::size_t> source_span(std::size_t i, std::size_t src, std::size_t dst) {
  std::size_t begin = i * src / dst;
  std::size_t end = (i + 1) * src / dst;
  if (end <= begin) end = begin + 1;
  return {begin, std::min(end, src)};
}

}  // namespace

LossBreakdown total_loss(const LossParts& parts, const LossWeights& weights) {
  for (double v : {parts.cls, parts.box, parts.mask, parts.semantic}) {
    if (!std::isfinite(v) || v < 0.0) throw NumericError("total_loss: invalid loss component");
  }
  LossBreakdown out;
  out.cls = parts.cls;
  out.box = parts.box;
  out.mask = parts.mask;
  out.semantic = parts.semantic;
  out.total = weights.cls * parts.cls + weights.box * parts.box + weights.mask * parts.mask +
              weights.semantic * parts.semantic;
  return out;
}

ClassificationLoss classification_loss_ohem(const Tensor<double>& logits, const MatchResult& match,
                                            std::span<const int> gt_labels, double ratio) {
  if (logits.rank() != 2 || logits.dim(0) != match.anchors.size()) {
    throw DimensionError("classification_loss_ohem: logits rows must equal anchor count");
  }
  if (!(ratio > 0)) throw ConfigError("classification_loss_ohem: ratio must be positive");
  const std::size_t n = logits.dim(0), c1 = logits.dim(1);

  std::vector<std::size_t> positives, negatives;
  std::vector<double> lse(n);
  for (std::size_t a = 0; a < n; ++a) {
    lse[a] = log_sum_exp(&logits[a * c1], c1);
    if (match.anchors[a].kind == MatchKind::positive) positives.push_back(a);
    if (match.anchors[a].kind == MatchKind::negative) negatives.push_back(a);
  }
  // Background-class loss drives negative mining.
  std::stable_sort(negatives.begin(), negatives.end(), [&](std::size_t a, std::size_t b) {
    return lse[a] - logits.at(a, 0) > lse[b] - logits.at(b, 0);
  });
  const std::size_t want =
      positives.empty() ? static_cast<std::size_t>(std::ceil(ratio))
                        : static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(positives.size())));
  negatives.resize(std::min(want, negatives.size()));

  ClassificationLoss out;
  out.grad = Tensor<double>(logits.shape());
  out.positives = positives.size();
  out.hard_negatives = negatives;
  const std::size_t selected = positives.size() + negatives.size();
  if (selected == 0) return out;
  const double scale = 1.0 / static_cast<double>(selected);

  const auto accumulate = [&](std::size_t a, std::size_t target) {
    out.value += (lse[a] - logits.at(a, target)) * scale;
    for (std::size_t k = 0; k < c1; ++k) {
      const double p = std::exp(logits.at(a, k) - lse[a]);
      out.grad.at(a, k) = (p - (k == target ? 1.0 : 0.0)) * scale;
    }
  };
  for (std::size_t a : positives) {
    const int g = match.anchors[a].gt;
    if (g < 0 || static_cast<std::size_t>(g) >= gt_labels.size()) {
      throw DimensionError("classification_loss_ohem: positive anchor without a labelled gt");
    }
    const auto target = static_cast<std::size_t>(gt_labels[static_cast<std::size_t>(g)] + 1);
    if (target >= c1) throw DimensionError("classification_loss_ohem: label out of range");
    accumulate(a, target);
  }
  for (std::size_t a : negatives) accumulate(a, 0);
  return out;
}

RegressionLoss box_loss(const Tensor<double>& pred, const Tensor<double>& target) {
  RegressionLoss out;
  if (pred.empty() && target.empty()) return out;
  if (pred.shape() != target.shape() || pred.rank() != 2 || pred.dim(1) != 4) {
    throw DimensionError("box_loss: expected matching [n, 4] tensors");
  }
  const double scale = 1.0 / static_cast<double>(pred.dim(0));
  out.grad = Tensor<double>(pred.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    if (std::abs(d) < 1.0) {
      out.value += 0.5 * d * d * scale;
      out.grad[i] = d * scale;
    } else {
      out.value += (std::abs(d) - 0.5) * scale;
      out.grad[i] = (d > 0 ? 1.0 : -1.0) * scale;
    }
  }
  return out;
}

MaskLoss mask_loss(const Tensor<double>& soft, const Tensor<double>& targets,
                   std::span<const Box> gt_boxes) {
  MaskLoss out;
  if (soft.empty() && targets.empty() && gt_boxes.empty()) return out;
  if (soft.rank() != 3 || soft.shape() != targets.shape() || soft.dim(0) != gt_boxes.size()) {
    throw DimensionError("mask_loss: expected matching [n, h, w] masks and one box per mask");
  }
  const std::size_t n = soft.dim(0), h = soft.dim(1), w = soft.dim(2);
  out.grad = Tensor<double>(soft.shape());

  std::vector<double> areas(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    areas[i] = gt_boxes[i].area() * static_cast<double>(h * w);
    if (areas[i] > 0.0) ++out.used; else ++out.skipped;
  }
  if (out.used == 0) return out;

  for (std::size_t i = 0; i < n; ++i) {
    if (areas[i] <= 0.0) continue;
    const double scale = 1.0 / (areas[i] * static_cast<double>(out.used));
    const PixelRect r = crop_region(gt_boxes[i], static_cast<int>(h), static_cast<int>(w), 0);
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        const std::size_t idx = (i * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x);
        const double m = soft[idx];
        const double t = targets[idx];
        const double p = std::clamp(m, kBceClamp, 1.0 - kBceClamp);
        out.value -= (t * std::log(p) + (1.0 - t) * std::log(1.0 - p)) * scale;
        // Unclamped derivative: the clamp guards the log, not the gradient,
        // so saturated wrong predictions still receive a signal.
        const double denom = std::max(m * (1.0 - m), 1e-300);
        out.grad[idx] = (m - t) / denom * scale;
      }
    }
  }
  return out;
}

RegressionLoss semantic_loss(const Tensor<double>& logits, const Tensor<double>& targets) {
  if (logits.rank() != 3 || logits.shape() != targets.shape()) {
    throw DimensionError("semantic_loss: expected matching [c, h, w] tensors");
  }
  RegressionLoss out;
  out.grad = Tensor<double>(logits.shape());
  const double scale = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], t = targets[i];
    // Stable BCE with logits: max(z, 0) - z t + log(1 + exp(-|z|)).
    out.value += (std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)))) * scale;
    out.grad[i] = (1.0 / (1.0 + std::exp(-z)) - t) * scale;
  }
  return out;
}

Tensor<double> downsample_mask_area(const Tensor<double>& mask, std::size_t h, std::size_t w) {
  if (mask.rank() != 2) throw DimensionError("downsample_mask_area: mask must be [H, W]");
  const std::size_t src_h = mask.dim(0), src_w = mask.dim(1);
  Tensor<double> out({h, w});
  for (std::size_t i = 0; i < h; ++i) {
    const auto [y0, y1] = source_span(i, src_h, h);
    for (std::size_t j = 0; j < w; ++j) {
      const auto [x0, x1] = source_span(j, src_w, w);
      double total = 0.0;
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) total += mask.at(y, x);
      const double mean = total / static_cast<double>((y1 - y0) * (x1 - x0));
      out.at(i, j) = mean > 0.5 ? 1.0 : 0.0;
    }
  }
  return out;
}

Tensor<double> downsample_mask_max(const Tensor<double>& mask, std::size_t h, std::size_t w) {
  if (mask.rank() != 2) throw DimensionError("downsample_mask_max: mask must be [H, W]");
  const std::size_t src_h = mask.dim(0), src_w = mask.dim(1);
  Tensor<double> out({h, w});
  for (std::size_t i = 0; i < h; ++i) {
    const auto [y0, y1] = source_span(i, src_h, h);
    for (std::size_t j = 0; j < w; ++j) {
      const auto [x0, x1] = source_span(j, src_w, w);
      double peak = 0.0;
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) peak = std::max(peak, mask.at(y, x));
      out.at(i, j) = peak;
    }
  }
  return out;
}

Tensor<double> semantic_targets(std::span<const Tensor<double>> masks, std::span<const int> labels,
                                std::size_t num_classes, std::size_t h, std::size_t w) {
  if (masks.size() != labels.size()) throw DimensionError("semantic_targets: one label per mask");
  Tensor<double> out({num_classes, h, w});
  for (std::size_t m = 0; m < masks.size(); ++m) {
    if (labels[m] < 0 || static_cast<std::size_t>(labels[m]) >= num_classes) {
      throw DimensionError("semantic_targets: label out of range");
    }
    const Tensor<double> pooled = downsample_mask_max(masks[m], h, w);
    const auto c = static_cast<std::size_t>(labels[m]);
    for (std::size_t p = 0; p < h * w; ++p) {
      out[c * h * w + p] = std::max(out[c * h * w + p], pooled[p]);
    }
  }
  return out;
}

}  // namespace protomask
