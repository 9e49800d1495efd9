// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace protomask {

GradCheckReport grad_check(const std::function<double()>& f, Tensor<double>& x,
                           std::span<const double> analytic, const GradCheckOptions& options) {
  if (!(options.eps >= 1e-6 && options.eps <= 1e-3)) {
    throw ConfigError("grad_check: eps must lie in [1e-6, 1e-3]");
  }
  if (analytic.size() != x.size()) throw DimensionError("grad_check: gradient length mismatch");

  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.sample && *options.sample < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(*options.sample);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + options.eps;
    const double plus = f();
    x[i] = saved - options.eps;
    const double minus = f();
    x[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus) || !std::isfinite(analytic[i])) {
      throw NumericError("grad_check: non-finite value at coordinate " + std::to_string(i));
    }
    const double numeric = (plus - minus) / (2.0 * options.eps);
    const double scale = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    const double err = std::abs(analytic[i] - numeric) / scale;
    if (report.checked == 0 || err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_index = i;
    }
    ++report.checked;
  }
  return report;
}

}  // namespace protomask
