// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "protomask/tensor.hpp"

namespace protomask {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// Check only this many randomly chosen coordinates (all when unset).
  std::optional<std::size_t> sample = std::nullopt;
  std::uint64_t seed = 0;
};

/// Compares `analytic` (the gradient of `f` with respect to `x`, computed by
/// a backward pass) with central differences of `f`, perturbing `x` in place
/// and restoring it. The per-coordinate error is
///   |analytic - numeric| / max(1, |analytic|, |numeric|).
/// Throws NumericError when `f` produces a non-finite value and ConfigError
/// when eps lies outside [1e-6, 1e-3].
GradCheckReport grad_check(const std::function<double()>& f, Tensor<double>& x,
                           std::span<const double> analytic, const GradCheckOptions& options = {});

}  // namespace protomask
