// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "protomask/layers.hpp"

namespace protomask {

struct SgdSettings {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// Momentum SGD over weights and biases of every layer:
///   v <- momentum * v + grad + weight_decay * w
///   w <- w - lr * v
/// Gradients are cleared afterwards. Throws StateError if any parameter
/// lacks a gradient.
template <typename T>
void sgd_step(std::span<LayerParams<T>*> params, const SgdSettings& settings);

}  // namespace protomask
