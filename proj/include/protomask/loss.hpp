// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "protomask/anchors.hpp"
#include "protomask/tensor.hpp"

namespace protomask {

struct LossWeights {
  double cls = 1.0;
  double box = 1.5;
  double mask = 6.125;
  double semantic = 1.0;
};

struct LossParts {
  double cls = 0.0;
  double box = 0.0;
  double mask = 0.0;
  double semantic = 0.0;
};

struct LossBreakdown {
  double cls = 0.0;
  double box = 0.0;
  double mask = 0.0;
  double semantic = 0.0;
  double total = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Weighted sum of the four parts. Throws NumericError on negative or
/// non-finite parts.
LossBreakdown total_loss(const LossParts& parts, const LossWeights& weights = {});

/// Probability clamp applied before taking logs in the BCE terms.
inline constexpr double kBceClamp = 1e-7;

struct ClassificationLoss {
  double value = 0.0;
  Tensor<double> grad;  // d value / d logits, zero outside the selected rows
  std::size_t positives = 0;
  std::vector<std::size_t> hard_negatives;  // selected negatives, hardest first
};

/// Softmax cross entropy over [anchors, c+1] logits (background is column 0)
/// averaged over all positives plus the ceil(ratio * #positives) negatives
/// with the largest background loss. Ignored anchors never contribute. With
/// no positives the min(ceil(ratio), available) hardest negatives are used.
/// `gt_labels[g]` is the 0-based class of ground truth g.
ClassificationLoss classification_loss_ohem(const Tensor<double>& logits, const MatchResult& match,
                                            std::span<const int> gt_labels, double ratio = 3.0);

struct RegressionLoss {
  double value = 0.0;
  Tensor<double> grad;
};

/// Smooth-L1 summed over the 4 coordinates, averaged over rows. Empty
/// tensors (no positives) give 0.
RegressionLoss box_loss(const Tensor<double>& pred, const Tensor<double>& target);

struct MaskLoss {
  double value = 0.0;
  Tensor<double> grad;  // d value / d soft mask
  std::size_t used = 0;
  std::size_t skipped = 0;  // instances with a zero-area ground-truth box
};

/// Per instance: pixel-wise BCE summed inside crop_region(gt box, pad 0),
/// divided by the gt box area in prototype pixels; averaged over instances.
/// `soft` and `targets` are [n, h, w].
MaskLoss mask_loss(const Tensor<double>& soft, const Tensor<double>& targets,
                   std::span<const Box> gt_boxes);

/// Multi-label sigmoid BCE between [c, h, w] logits and {0,1} targets,
/// averaged over every pixel and class.
RegressionLoss semantic_loss(const Tensor<double>& logits, const Tensor<double>& targets);

/// Area-average downsample of an [H, W] binary mask to [h, w], then
/// threshold (> 0.5).
Tensor<double> downsample_mask_area(const Tensor<double>& mask, std::size_t h, std::size_t w);

/// Max-pool downsample of an [H, W] binary mask to [h, w].
Tensor<double> downsample_mask_max(const Tensor<double>& mask, std::size_t h, std::size_t w);

/// [c, h, w] multi-label targets: channel k is the max-pooled union of the
/// masks of every instance labelled k.
Tensor<double> semantic_targets(std::span<const Tensor<double>> masks, std::span<const int> labels,
                                std::size_t num_classes, std::size_t h, std::size_t w);

}  // namespace protomask
