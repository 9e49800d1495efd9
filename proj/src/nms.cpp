// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/nms.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace protomask {

namespace {

// Input rows of each class, sorted by score descending with stable ties.
std::map<int, std::vector<std::size_t>> rows_by_class(const ScoredDetections& d) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < d.size(); ++i) groups[d.classes[i]].push_back(i);
  for (auto& [cls, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::size_t a, std::size_t b) { return d.scores[a] > d.scores[b]; });
  }
  return groups;
}

}  // namespace

ScoredDetections ScoredDetections::select(const std::vector<std::size_t>& rows) const {
  ScoredDetections out;
  out.boxes.reserve(rows.size());
  for (std::size_t r : rows) {
    out.boxes.push_back(boxes.at(r));
    out.scores.push_back(scores.at(r));
    out.classes.push_back(classes.at(r));
  }
  if (coeffs && !rows.empty()) {
    const std::size_t k = coeffs->dim(1);
    Tensor<double> c({rows.size(), k});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) c.at(i, j) = coeffs->at(rows[i], j);
    }
    out.coeffs = std::move(c);
  }
  return out;
}

void ScoredDetections::validate() const {
  if (scores.size() != boxes.size() || classes.size() != boxes.size()) {
    throw DimensionError("detections: boxes, scores and classes differ in length");
  }
  if (coeffs && coeffs->dim(0) != boxes.size()) {
    throw DimensionError("detections: coefficient rows differ from detection count");
  }
}

std::vector<std::size_t> sequential_nms_indices(const ScoredDetections& d, double iou_threshold) {
  d.validate();
  std::vector<std::size_t> kept;
  for (const auto& [cls, rows] : rows_by_class(d)) {
    std::vector<std::size_t> class_kept;
    for (std::size_t r : rows) {
      bool suppressed = false;
      for (std::size_t k : class_kept) {
        if (iou(d.boxes[k], d.boxes[r]) > iou_threshold) {
          suppressed = true;
          break;
        }
      }
      if (!suppressed) class_kept.push_back(r);
    }
    kept.insert(kept.end(), class_kept.begin(), class_kept.end());
  }
  return kept;
}

std::vector<std::size_t> fast_nms_indices(const ScoredDetections& d, double iou_threshold,
                                          std::size_t top_n) {
  d.validate();
  std::vector<std::size_t> kept;
  for (auto [cls, rows] : rows_by_class(d)) {
    if (rows.size() > top_n) rows.resize(top_n);
    const std::size_t n = rows.size();
    if (n == 0) continue;
    std::vector<Box> boxes(n);
    for (std::size_t i = 0; i < n; ++i) boxes[i] = d.boxes[rows[i]];
    Tensor<double> x = iou_matrix(boxes, boxes);
    // triu(X, 1): zero the diagonal and lower triangle.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) x.at(i, j) = 0.0;
    }
    // K_j = max_i X_ij (column-wise max).
    std::vector<double> column_max(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) column_max[j] = std::max(column_max[j], x.at(i, j));
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (column_max[j] <= iou_threshold) kept.push_back(rows[j]);
    }
  }
  return kept;
}

ScoredDetections sequential_nms(const ScoredDetections& d, double iou_threshold) {
  return d.select(sequential_nms_indices(d, iou_threshold));
}

ScoredDetections fast_nms(const ScoredDetections& d, double iou_threshold, std::size_t top_n) {
  return d.select(fast_nms_indices(d, iou_threshold, top_n));
}

std::vector<std::size_t> score_filter_indices(const ScoredDetections& d, double min_score,
                                              std::size_t max_per_image) {
  d.validate();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.scores[i] >= min_score) rows.push_back(i);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [&](std::size_t a, std::size_t b) { return d.scores[a] > d.scores[b]; });
  if (rows.size() > max_per_image) rows.resize(max_per_image);
  return rows;
}

ScoredDetections score_filter(const ScoredDetections& d, double min_score,
                              std::size_t max_per_image) {
  return d.select(score_filter_indices(d, min_score, max_per_image));
}

}  // namespace protomask
