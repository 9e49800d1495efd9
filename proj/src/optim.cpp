// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/optim.hpp"

namespace protomask {

namespace {

template <typename T>
void update(Tensor<T>& value, Tensor<T>& velocity, const SgdSettings& s) {
  if (velocity.empty()) velocity = Tensor<T>(value.shape());
  auto w = value.data();
  auto v = velocity.data();
  auto g = value.grad();
  const T lr = static_cast<T>(s.learning_rate);
  const T mu = static_cast<T>(s.momentum);
  const T wd = static_cast<T>(s.weight_decay);
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = mu * v[i] + g[i] + wd * w[i];
    w[i] -= lr * v[i];
  }
  value.clear_grad();
}

}  // namespace

template <typename T>
void sgd_step(std::span<LayerParams<T>*> params, const SgdSettings& settings) {
  for (const LayerParams<T>* p : params) {
    if (!p->weights.has_grad() || !p->bias.has_grad()) {
      throw StateError("sgd_step: layer " + p->name + " has no gradient; run backward first");
    }
  }
  for (LayerParams<T>* p : params) {
    update(p->weights, p->weights_velocity, settings);
    update(p->bias, p->bias_velocity, settings);
  }
}

template void sgd_step(std::span<LayerParams<float>*>, const SgdSettings&);
template void sgd_step(std::span<LayerParams<double>*>, const SgdSettings&);

}  // namespace protomask
