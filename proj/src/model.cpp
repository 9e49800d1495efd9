// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/model.hpp"

#include <random>

namespace protomask {

namespace {

template <typename T>
Tensor<T> apply(const LayerParams<T>& p, const Tensor<T>& x, std::optional<Activation> act,
                ConvRecord<T>* record) {
  Tensor<T> y = conv2d(x, p);
  if (act) y = activation(y, *act);
  require_finite(y, "layer " + p.name);
  if (record) {
    record->input = x;
    record->output = y;
  }
  return y;
}

template <typename T>
Tensor<T> back(LayerParams<T>& p, const ConvRecord<T>& record, Tensor<T> dout,
               std::optional<Activation> act) {
  if (act) dout = activation_backward(record.output, dout, *act);
  return conv2d_backward(record.input, p, dout);
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  if (dst.shape() != src.shape()) throw DimensionError("gradient accumulation shape mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void copy_rows(const Tensor<T>& src, Tensor<T>& dst, std::size_t offset) {
  std::copy(src.data().begin(), src.data().end(),
            dst.data().begin() + static_cast<std::ptrdiff_t>(offset * dst.dim(1)));
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& src, std::size_t offset, std::size_t count) {
  const std::size_t width = src.dim(1);
  std::vector<T> values(src.data().begin() + static_cast<std::ptrdiff_t>(offset * width),
                        src.data().begin() + static_cast<std::ptrdiff_t>((offset + count) * width));
  return Tensor<T>({count, width}, std::move(values));
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  anchors_ = config_.make_anchors();
  build(seed);
}

template <typename T>
void Model<T>::build(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& c = config_;
  const auto ch = [](int v) { return static_cast<std::size_t>(v); };
  const std::size_t a = c.anchors_per_cell();

  stem_.push_back(LayerParams<T>::conv("stem.0", 3, ch(c.stem_channels[0]), 3, 2, rng));
  stem_.push_back(LayerParams<T>::conv("stem.1", ch(c.stem_channels[0]), ch(c.stem_channels[1]), 3, 2, rng));
  std::size_t prev = ch(c.stem_channels[1]);
  for (std::size_t s = 0; s < c.stage_channels.size(); ++s) {
    const std::size_t width = ch(c.stage_channels[s]);
    const std::string base = "stage." + std::to_string(s);
    stage_down_.push_back(LayerParams<T>::conv(base + ".down", prev, width, 3, 2, rng));
    stage_conv_.push_back(LayerParams<T>::conv(base + ".conv", width, width, 3, 1, rng));
    lateral_.push_back(LayerParams<T>::conv("fpn.lateral." + std::to_string(s), width,
                                            ch(c.fpn_channels), 1, 1, rng));
    smooth_.push_back(LayerParams<T>::conv("fpn.smooth." + std::to_string(s), ch(c.fpn_channels),
                                           ch(c.fpn_channels), 3, 1, rng));
    prev = width;
  }
  for (int d = 0; d < c.head_shared_convs; ++d) {
    head_shared_.push_back(LayerParams<T>::conv("head.shared." + std::to_string(d),
                                                ch(c.fpn_channels), ch(c.fpn_channels), 3, 1, rng));
  }
  head_cls_ = LayerParams<T>::conv("head.cls", ch(c.fpn_channels), a * ch(c.num_classes + 1), 3, 1, rng);
  head_box_ = LayerParams<T>::conv("head.box", ch(c.fpn_channels), a * 4, 3, 1, rng);
  head_coef_ = LayerParams<T>::conv("head.coef", ch(c.fpn_channels), a * ch(c.num_prototypes), 3, 1, rng);
  std::size_t in = ch(c.fpn_channels);
  for (int i = 0; i < 3; ++i) {
    proto_.push_back(LayerParams<T>::conv("proto." + std::to_string(i), in, ch(c.proto_channels), 3, 1, rng));
    in = ch(c.proto_channels);
  }
  proto_refine_ = LayerParams<T>::conv("proto.refine", in, ch(c.proto_channels), 3, 1, rng);
  proto_out_ = LayerParams<T>::conv("proto.out", ch(c.proto_channels), ch(c.num_prototypes), 1, 1, rng);
  semantic_ = LayerParams<T>::conv("semantic", ch(c.fpn_channels), ch(c.num_classes), 1, 1, rng);
}

template <typename T>
std::vector<LayerParams<T>*> Model<T>::parameters() {
  std::vector<LayerParams<T>*> out;
  for (auto& p : stem_) out.push_back(&p);
  for (std::size_t s = 0; s < stage_down_.size(); ++s) {
    out.push_back(&stage_down_[s]);
    out.push_back(&stage_conv_[s]);
  }
  for (auto& p : lateral_) out.push_back(&p);
  for (auto& p : smooth_) out.push_back(&p);
  for (auto& p : head_shared_) out.push_back(&p);
  out.push_back(&head_cls_);
  out.push_back(&head_box_);
  out.push_back(&head_coef_);
  for (auto& p : proto_) out.push_back(&p);
  out.push_back(&proto_refine_);
  out.push_back(&proto_out_);
  out.push_back(&semantic_);
  return out;
}

template <typename T>
std::vector<const LayerParams<T>*> Model<T>::parameters() const {
  auto mutable_params = const_cast<Model*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto* p : parameters()) total += p->weights.size() + p->bias.size();
  return total;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto* p : parameters()) {
    p->weights.clear_grad();
    p->bias.clear_grad();
  }
}

template <typename T>
NetworkOutputs<T> Model<T>::forward(const Tensor<T>& image, bool train, ForwardCache<T>* cache) const {
  const auto& c = config_;
  const auto s = static_cast<std::size_t>(c.input_size);
  if (image.shape() != Shape{3, s, s}) {
    throw DimensionError("forward: expected image [3," + std::to_string(s) + "," + std::to_string(s) +
                         "], got " + shape_string(image.shape()));
  }
  require_finite(image, "input image");
  const std::size_t levels = c.stage_channels.size();
  const std::size_t a = c.anchors_per_cell();
  if (cache) {
    *cache = ForwardCache<T>{};
    cache->stem.resize(stem_.size());
    cache->stage_down.resize(levels);
    cache->stage_conv.resize(levels);
    cache->lateral.resize(levels);
    cache->smooth.resize(levels);
    cache->head_shared.assign(levels, std::vector<ConvRecord<T>>(head_shared_.size()));
    cache->head_cls.resize(levels);
    cache->head_box.resize(levels);
    cache->head_coef.resize(levels);
    cache->proto.resize(proto_.size());
    cache->merged_h.resize(levels);
    cache->merged_w.resize(levels);
  }
  Tensor<T> x = image;
  for (std::size_t i = 0; i < stem_.size(); ++i) {
    x = apply(stem_[i], x, Activation::relu, cache ? &cache->stem[i] : nullptr);
  }
  std::vector<Tensor<T>> features;
  for (std::size_t l = 0; l < levels; ++l) {
    x = apply(stage_down_[l], x, Activation::relu, cache ? &cache->stage_down[l] : nullptr);
    x = apply(stage_conv_[l], x, Activation::relu, cache ? &cache->stage_conv[l] : nullptr);
    features.push_back(x);
  }

  // FPN top-down: merged[l] = lateral[l] + crop(upsample(merged[l + 1])).
  std::vector<Tensor<T>> merged(levels);
  for (std::size_t l = levels; l-- > 0;) {
    Tensor<T> lat = apply(lateral_[l], features[l], std::nullopt, cache ? &cache->lateral[l] : nullptr);
    if (l + 1 < levels) {
      Tensor<T> up = upsample_bilinear_x2(merged[l + 1]);
      up = crop_spatial(up, lat.dim(1), lat.dim(2));
      lat = add(lat, up);
    }
    merged[l] = std::move(lat);
    if (cache) {
      cache->merged_h[l] = merged[l].dim(1);
      cache->merged_w[l] = merged[l].dim(2);
    }
  }
  std::vector<Tensor<T>> pyramid(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    pyramid[l] = apply(smooth_[l], merged[l], std::nullopt, cache ? &cache->smooth[l] : nullptr);
  }

  NetworkOutputs<T> out;
  const std::size_t total = anchors_.size();
  out.class_logits = Tensor<T>({total, static_cast<std::size_t>(c.num_classes + 1)});
  out.box_deltas = Tensor<T>({total, 4});
  out.coeffs = Tensor<T>({total, static_cast<std::size_t>(c.num_prototypes)});
  for (std::size_t l = 0; l < levels; ++l) {
    const std::size_t gh = pyramid[l].dim(1), gw = pyramid[l].dim(2);
    const auto& level = anchors_.levels()[l];
    if (gh != static_cast<std::size_t>(level.grid_h) || gw != static_cast<std::size_t>(level.grid_w)) {
      throw DimensionError("forward: pyramid level " + std::to_string(l) +
                           " does not match the anchor grid");
    }
    Tensor<T> h = pyramid[l];
    for (std::size_t d = 0; d < head_shared_.size(); ++d) {
      h = apply(head_shared_[d], h, Activation::relu, cache ? &cache->head_shared[l][d] : nullptr);
    }
    const std::size_t offset = anchors_.level_offset(l);
    copy_rows(channels_to_rows(apply(head_cls_, h, std::nullopt, cache ? &cache->head_cls[l] : nullptr), a),
              out.class_logits, offset);
    copy_rows(channels_to_rows(apply(head_box_, h, std::nullopt, cache ? &cache->head_box[l] : nullptr), a),
              out.box_deltas, offset);
    copy_rows(channels_to_rows(apply(head_coef_, h, Activation::tanh, cache ? &cache->head_coef[l] : nullptr), a),
              out.coeffs, offset);
  }

  Tensor<T> p = pyramid[0];
  for (std::size_t i = 0; i < proto_.size(); ++i) {
    p = apply(proto_[i], p, Activation::relu, cache ? &cache->proto[i] : nullptr);
  }
  if (cache) {
    cache->proto_up_h = p.dim(1);
    cache->proto_up_w = p.dim(2);
  }
  p = upsample_bilinear_x2(p);
  p = apply(proto_refine_, p, Activation::relu, cache ? &cache->proto_refine : nullptr);
  p = apply(proto_out_, p, Activation::relu, cache ? &cache->proto_out : nullptr);
  out.prototypes = chw_to_hwc(p);

  if (train) {
    ConvRecord<T> record;
    out.seg_logits = apply(semantic_, pyramid[0], std::nullopt, cache ? &record : nullptr);
    if (cache) cache->semantic = std::move(record);
  }
  return out;
}

template <typename T>
void Model<T>::backward(const ForwardCache<T>& cache, const OutputGrads<T>& grads) {
  const auto& c = config_;
  const std::size_t levels = c.stage_channels.size();
  const std::size_t a = c.anchors_per_cell();
  if (cache.smooth.size() != levels) throw StateError("backward: cache does not come from forward()");

  std::vector<Tensor<T>> d_pyramid(levels);

  // Prediction heads, shared across levels.
  const bool any_head = !grads.class_logits.empty() || !grads.box_deltas.empty() || !grads.coeffs.empty();
  for (std::size_t l = 0; l < levels && any_head; ++l) {
    const auto& level = anchors_.levels()[l];
    const auto gh = static_cast<std::size_t>(level.grid_h), gw = static_cast<std::size_t>(level.grid_w);
    const std::size_t offset = anchors_.level_offset(l);
    const std::size_t count = gh * gw * a;
    Tensor<T> dh;
    if (!grads.class_logits.empty()) {
      auto d = rows_to_channels(slice_rows(grads.class_logits, offset, count), a, gh, gw);
      accumulate(dh, back(head_cls_, cache.head_cls[l], std::move(d), std::nullopt));
    }
    if (!grads.box_deltas.empty()) {
      auto d = rows_to_channels(slice_rows(grads.box_deltas, offset, count), a, gh, gw);
      accumulate(dh, back(head_box_, cache.head_box[l], std::move(d), std::nullopt));
    }
    if (!grads.coeffs.empty()) {
      auto d = rows_to_channels(slice_rows(grads.coeffs, offset, count), a, gh, gw);
      accumulate(dh, back(head_coef_, cache.head_coef[l], std::move(d), Activation::tanh));
    }
    for (std::size_t d = head_shared_.size(); d-- > 0;) {
      dh = back(head_shared_[d], cache.head_shared[l][d], std::move(dh), Activation::relu);
    }
    accumulate(d_pyramid[l], dh);
  }

  if (!grads.prototypes.empty()) {
    Tensor<T> d = hwc_to_chw(grads.prototypes);
    d = back(proto_out_, cache.proto_out, std::move(d), Activation::relu);
    d = back(proto_refine_, cache.proto_refine, std::move(d), Activation::relu);
    d = upsample_bilinear_x2_backward(d, cache.proto_up_h, cache.proto_up_w);
    for (std::size_t i = proto_.size(); i-- > 0;) {
      d = back(proto_[i], cache.proto[i], std::move(d), Activation::relu);
    }
    accumulate(d_pyramid[0], d);
  }

  if (!grads.seg_logits.empty()) {
    if (!cache.semantic) throw StateError("backward: semantic gradient without a training forward");
    accumulate(d_pyramid[0], back(semantic_, *cache.semantic, grads.seg_logits, std::nullopt));
  }

  // FPN.
  std::vector<Tensor<T>> d_merged(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    if (d_pyramid[l].empty()) {
      d_pyramid[l] = Tensor<T>(cache.smooth[l].output.shape());
    }
    d_merged[l] = back(smooth_[l], cache.smooth[l], std::move(d_pyramid[l]), std::nullopt);
  }
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    const std::size_t h = cache.merged_h[l + 1], w = cache.merged_w[l + 1];
    Tensor<T> d_up = crop_spatial_backward(d_merged[l], 2 * h, 2 * w);
    accumulate(d_merged[l + 1], upsample_bilinear_x2_backward(d_up, h, w));
  }
  std::vector<Tensor<T>> d_features(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    d_features[l] = back(lateral_[l], cache.lateral[l], std::move(d_merged[l]), std::nullopt);
  }

  // Backbone.
  Tensor<T> d = std::move(d_features[levels - 1]);
  for (std::size_t l = levels; l-- > 0;) {
    d = back(stage_conv_[l], cache.stage_conv[l], std::move(d), Activation::relu);
    d = back(stage_down_[l], cache.stage_down[l], std::move(d), Activation::relu);
    if (l > 0) accumulate(d, d_features[l - 1]);
  }
  for (std::size_t i = stem_.size(); i-- > 0;) {
    d = back(stem_[i], cache.stem[i], std::move(d), Activation::relu);
  }
  // Layers absent from this pass (semantic head at inference) still get a
  // zero gradient so the optimizer sees a complete set.
  for (auto* p : parameters()) {
    p->weights.ensure_grad();
    p->bias.ensure_grad();
  }
}

template <typename T>
Checkpoint model_to_checkpoint(const Model<T>& model, const nlohmann::json& meta) {
  Checkpoint ckpt;
  ckpt.meta = meta.is_object() ? meta : nlohmann::json::object();
  ckpt.meta["config"] = to_json(model.config());
  for (const auto* p : model.parameters()) {
    ckpt.tensors.push_back({p->name + ".weight", p->weights.template cast<double>()});
    ckpt.tensors.push_back({p->name + ".bias", p->bias.template cast<double>()});
    if (!p->weights_velocity.empty()) {
      ckpt.tensors.push_back({p->name + ".weight.velocity", p->weights_velocity.template cast<double>()});
    }
    if (!p->bias_velocity.empty()) {
      ckpt.tensors.push_back({p->name + ".bias.velocity", p->bias_velocity.template cast<double>()});
    }
  }
  return ckpt;
}

template <typename T>
Model<T> model_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("config")) throw FormatError("checkpoint: missing field \"meta.config\"");
  Model<T> model(model_config_from_json(ckpt.meta["config"]));
  const auto load = [&](const std::string& name, const Shape& expected) -> const Tensor<double>* {
    const auto* src = ckpt.find(name);
    if (src && src->shape() != expected) {
      throw FormatError("checkpoint tensor \"" + name + "\": shape " + shape_string(src->shape()) +
                        " does not match " + shape_string(expected));
    }
    return src;
  };
  for (auto* p : model.parameters()) {
    const Shape weight_shape = p->weights.shape();
    const Shape bias_shape = p->bias.shape();
    p->weights = ckpt.get(p->name + ".weight").template cast<T>();
    p->bias = ckpt.get(p->name + ".bias").template cast<T>();
    load(p->name + ".weight", weight_shape);
    load(p->name + ".bias", bias_shape);
    if (const auto* v = load(p->name + ".weight.velocity", weight_shape)) {
      p->weights_velocity = v->template cast<T>();
    }
    if (const auto* v = load(p->name + ".bias.velocity", bias_shape)) {
      p->bias_velocity = v->template cast<T>();
    }
  }
  return model;
}

template class Model<float>;
template class Model<double>;
template Checkpoint model_to_checkpoint(const Model<float>&, const nlohmann::json&);
template Checkpoint model_to_checkpoint(const Model<double>&, const nlohmann::json&);
template Model<float> model_from_checkpoint(const Checkpoint&);
template Model<double> model_from_checkpoint(const Checkpoint&);

}  // namespace protomask
