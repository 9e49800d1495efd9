// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "protomask/config.hpp"
#include "protomask/layers.hpp"
#include "protomask/tensor_io.hpp"

namespace protomask {

/// Everything one forward pass produces. Rows of the per-anchor tensors
/// are index-aligned with the anchor grid.
template <typename T>
struct NetworkOutputs {
  Tensor<T> class_logits;  // [anchors, c + 1], column 0 is background
  Tensor<T> box_deltas;    // [anchors, 4]
  Tensor<T> coeffs;        // [anchors, k], tanh-bounded
  Tensor<T> prototypes;    // [h, w, k], ReLU output
  std::optional<Tensor<T>> seg_logits;  // [c, h3, w3], training only
};

/// Upstream gradients for backward(). Empty tensors mean "no gradient".
template <typename T>
struct OutputGrads {
  Tensor<T> class_logits;
  Tensor<T> box_deltas;
  Tensor<T> coeffs;
  Tensor<T> prototypes;
  Tensor<T> seg_logits;
};

/// One convolution application: its input and its post-activation output.
template <typename T>
struct ConvRecord {
  Tensor<T> input;
  Tensor<T> output;
};

/// Activations retained by forward() for backward().
template <typename T>
struct ForwardCache {
  std::vector<ConvRecord<T>> stem;
  std::vector<ConvRecord<T>> stage_down;
  std::vector<ConvRecord<T>> stage_conv;
  std::vector<ConvRecord<T>> lateral;
  std::vector<std::size_t> merged_h, merged_w;  // FPN map sizes per level
  std::vector<ConvRecord<T>> smooth;
  std::vector<std::vector<ConvRecord<T>>> head_shared;  // [level][conv]
  std::vector<ConvRecord<T>> head_cls, head_box, head_coef;
  std::vector<ConvRecord<T>> proto;  // 3x3 convs before the upsample
  std::size_t proto_up_h = 0, proto_up_w = 0;
  ConvRecord<T> proto_refine;
  ConvRecord<T> proto_out;
  std::optional<ConvRecord<T>> semantic;
};

/// The toy prototype-mask network: stride-2 conv backbone, FPN-lite with
/// 1x1 laterals and 3x3 smoothing, a prediction head shared across levels
/// (shared 3x3 conv, then parallel class / box / coefficient 3x3 convs)
/// and protonet on the stride-8 map.
template <typename T>
class Model {
 public:
  explicit Model(ModelConfig config, std::uint64_t seed = 0);

  const ModelConfig& config() const noexcept { return config_; }
  const AnchorGrid& anchors() const noexcept { return anchors_; }

  std::vector<LayerParams<T>*> parameters();
  std::vector<const LayerParams<T>*> parameters() const;
  std::size_t parameter_count() const;

  /// Runs the network on a [3, S, S] image in [0, 1]. `train` adds the
  /// semantic head. Pass `cache` to retain activations for backward().
  /// Throws NumericError naming the layer on NaN/Inf.
  NetworkOutputs<T> forward(const Tensor<T>& image, bool train,
                            ForwardCache<T>* cache = nullptr) const;

  /// Accumulates parameter gradients for the given output gradients.
  void backward(const ForwardCache<T>& cache, const OutputGrads<T>& grads);

  void zero_grad();

  template <typename U>
  Model<U> cast() const;

 private:
  template <typename>
  friend class Model;

  Model() = default;
  void build(std::uint64_t seed);

  ModelConfig config_;
  AnchorGrid anchors_;
  std::vector<LayerParams<T>> stem_;
  std::vector<LayerParams<T>> stage_down_;
  std::vector<LayerParams<T>> stage_conv_;
  std::vector<LayerParams<T>> lateral_;
  std::vector<LayerParams<T>> smooth_;
  std::vector<LayerParams<T>> head_shared_;
  LayerParams<T> head_cls_, head_box_, head_coef_;
  std::vector<LayerParams<T>> proto_;
  LayerParams<T> proto_refine_, proto_out_;
  LayerParams<T> semantic_;
};

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out;
  out.config_ = config_;
  out.anchors_ = anchors_;
  const auto convert = [](const std::vector<LayerParams<T>>& v) {
    std::vector<LayerParams<U>> r;
    for (const auto& p : v) r.push_back(p.template cast<U>());
    return r;
  };
  out.stem_ = convert(stem_);
  out.stage_down_ = convert(stage_down_);
  out.stage_conv_ = convert(stage_conv_);
  out.lateral_ = convert(lateral_);
  out.smooth_ = convert(smooth_);
  out.head_shared_ = convert(head_shared_);
  out.head_cls_ = head_cls_.template cast<U>();
  out.head_box_ = head_box_.template cast<U>();
  out.head_coef_ = head_coef_.template cast<U>();
  out.proto_ = convert(proto_);
  out.proto_refine_ = proto_refine_.template cast<U>();
  out.proto_out_ = proto_out_.template cast<U>();
  out.semantic_ = semantic_.template cast<U>();
  return out;
}

/// Weights, momentum buffers and config as a checkpoint. `meta` entries are
/// merged into the checkpoint metadata.
template <typename T>
Checkpoint model_to_checkpoint(const Model<T>& model, const nlohmann::json& meta = {});

/// Rebuilds a model from a checkpoint written by model_to_checkpoint.
/// Throws FormatError when a tensor is missing or has the wrong shape.
template <typename T>
Model<T> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace protomask
