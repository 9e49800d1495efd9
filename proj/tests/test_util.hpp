// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "protomask/config.hpp"
#include "protomask/dataset.hpp"
#include "protomask/grad_check.hpp"
#include "protomask/tensor.hpp"

namespace protomask::testing {

inline Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(shape);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Checks the backward of y = forward(x) against finite differences of the
/// scalar L = <r, y> for a random projection r. `backward(r)` returns dL/dx.
inline double op_grad_error(Tensor<double>& x, const std::function<Tensor<double>(const Tensor<double>&)>& forward,
                            const std::function<Tensor<double>(const Tensor<double>&)>& backward,
                            std::mt19937_64& rng) {
  const Tensor<double> y = forward(x);
  const Tensor<double> r = random_tensor(y.shape(), rng);
  const Tensor<double> dx = backward(r);
  const auto f = [&] { return dot(r, forward(x)); };
  return grad_check(f, x, dx.data()).max_relative_error;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  // ctest runs each test in its own process, possibly in parallel.
  const auto dir = std::filesystem::temp_directory_path() /
                   ("protomask_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// 101-point interpolated AP computed directly from its definition: at each
/// recall level r, the best precision over all ranks reaching recall >= r.
/// Integer comparisons avoid rounding at the recall levels.
inline double brute_force_ap(const std::vector<bool>& tp, std::size_t n_gt) {
  if (n_gt == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k <= 100; ++k) {
    double best = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < tp.size(); ++rank) {
      hits += tp[rank] ? 1 : 0;
      if (100 * hits >= k * n_gt) best = std::max(best, static_cast<double>(hits) / static_cast<double>(rank + 1));
    }
    sum += best;
  }
  return sum / 101.0;
}

/// Small network on 32x32 inputs, cheap enough for exhaustive tests.
inline ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.input_size = 32;
  cfg.num_prototypes = 4;
  cfg.stem_channels = {4, 4};
  cfg.stage_channels = {6, 6, 6};
  cfg.fpn_channels = 6;
  cfg.proto_channels = 6;
  cfg.anchor_scales = {8.0, 14.0, 24.0};
  return cfg;
}

inline GeneratorOptions tiny_generator() {
  GeneratorOptions o;
  o.size = 32;
  o.max_instances = 2;
  o.min_scale = 0.3;
  o.max_scale = 0.6;
  o.min_visible_pixels = 8;
  return o;
}

}  // namespace protomask::testing
