// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/infer.hpp"

#include <chrono>

#include "protomask/assembly.hpp"
#include "protomask/errors.hpp"

namespace protomask {

std::string to_string(NmsVariant v) { return v == NmsVariant::fast ? "fast" : "sequential"; }

NmsVariant nms_variant_from_string(const std::string& s) {
  if (s == "fast") return NmsVariant::fast;
  if (s == "sequential") return NmsVariant::sequential;
  throw ConfigError("unknown NMS variant '" + s + "' (expected fast or sequential)");
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

template <typename T>
ScoredDetections candidate_detections(const AnchorGrid& anchors, const NetworkOutputs<T>& out,
                                      const ModelConfig& config, double score_threshold) {
  const Tensor<T> probs = softmax_rows(out.class_logits);
  const std::size_t n = anchors.size();
  const std::size_t c = static_cast<std::size_t>(config.num_classes);
  const std::size_t k = out.coeffs.dim(1);
  ScoredDetections d;
  std::vector<std::size_t> rows;
  for (std::size_t cls = 0; cls < c; ++cls) {
    for (std::size_t a = 0; a < n; ++a) {
      const double p = static_cast<double>(probs.at(a, cls + 1));
      if (p < score_threshold) continue;
      const BoxDeltas t = {static_cast<double>(out.box_deltas.at(a, 0)), static_cast<double>(out.box_deltas.at(a, 1)),
                           static_cast<double>(out.box_deltas.at(a, 2)), static_cast<double>(out.box_deltas.at(a, 3))};
      d.boxes.push_back(decode_box(t, anchors[a], config.variances));
      d.scores.push_back(p);
      d.classes.push_back(static_cast<int>(cls));
      rows.push_back(a);
    }
  }
  if (!rows.empty()) {
    Tensor<double> coeffs({rows.size(), k});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) coeffs.at(i, j) = static_cast<double>(out.coeffs.at(rows[i], j));
    }
    d.coeffs = std::move(coeffs);
  }
  return d;
}

template <typename T>
InferenceResult infer(const Model<T>& model, const Tensor<double>& image, const InferenceOptions& options) {
  const ModelConfig& cfg = model.config();
  const auto s = static_cast<std::size_t>(cfg.input_size);
  if (image.shape() != Shape{3, s, s}) {
    throw DimensionError("infer expects a [3, " + std::to_string(s) + ", " + std::to_string(s) + "] image, got " +
                         shape_string(image.shape()));
  }
  const auto& st = options.settings;
  InferenceResult result;

  auto t0 = std::chrono::steady_clock::now();
  const NetworkOutputs<T> out = model.forward(image.template cast<T>(), false);
  result.prototypes = out.prototypes.template cast<double>();
  result.network_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  const ScoredDetections candidates = candidate_detections(model.anchors(), out, cfg, st.score_threshold);
  ScoredDetections kept;
  if (!candidates.empty()) {
    kept = options.nms == NmsVariant::fast ? fast_nms(candidates, st.nms_iou, st.nms_top_n)
                                           : sequential_nms(candidates, st.nms_iou);
    kept = score_filter(kept, st.score_threshold, st.max_detections);
  }
  result.nms_ms = ms_since(t0);
  result.kept = kept;

  for (std::size_t i = 0; i < kept.size(); ++i) {
    result.detections.push_back({kept.classes[i], kept.scores[i], kept.boxes[i], {}});
  }
  if (options.boxes_only || kept.empty()) return result;

  t0 = std::chrono::steady_clock::now();
  const Tensor<double> soft = assemble(result.prototypes, *kept.coeffs);
  MaskSet masks = crop_and_threshold(soft, kept.boxes, st.mask_threshold, kInferenceCropPad);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    result.detections[i].mask = upscale_mask(mask_slice(masks.binary, i), s, s);
  }
  result.soft_masks = std::move(masks.soft);
  result.mask_ms = ms_since(t0);
  return result;
}

template ScoredDetections candidate_detections(const AnchorGrid&, const NetworkOutputs<float>&, const ModelConfig&,
                                               double);
template ScoredDetections candidate_detections(const AnchorGrid&, const NetworkOutputs<double>&, const ModelConfig&,
                                               double);
template InferenceResult infer(const Model<float>&, const Tensor<double>&, const InferenceOptions&);
template InferenceResult infer(const Model<double>&, const Tensor<double>&, const InferenceOptions&);

}  // namespace protomask
