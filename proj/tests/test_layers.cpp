// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "protomask/errors.hpp"
#include "protomask/layers.hpp"
#include "test_util.hpp"

namespace protomask {
namespace {

using testing::op_grad_error;
using testing::random_tensor;

constexpr double kGradTol = 1e-4;

Tensor<double> mat(std::size_t r, std::size_t c, std::vector<double> v) { return Tensor<double>({r, c}, std::move(v)); }

TEST(Matmul, IdentityAndHandExample) {
  const auto id = mat(2, 2, {1, 0, 0, 1});
  const auto x = mat(2, 2, {0.3, -2, 5, 7});
  EXPECT_EQ(matmul(id, x), x);
  EXPECT_EQ(matmul(x, id), x);
  EXPECT_EQ(matmul(mat(2, 2, {1, 2, 3, 4}), mat(2, 2, {0, 1, 1, 0})), mat(2, 2, {2, 1, 4, 3}));
  EXPECT_THROW(matmul(mat(2, 3, std::vector<double>(6)), mat(2, 2, std::vector<double>(4))), DimensionError);
}

TEST(Matmul, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> a = random_tensor({3, 4}, rng);
    Tensor<double> b = random_tensor({4, 2}, rng);
    EXPECT_LE(op_grad_error(
                  a, [&](const Tensor<double>& x) { return matmul(x, b); },
                  [&](const Tensor<double>& d) { return matmul_backward(a, b, d).da; }, rng),
              kGradTol);
    EXPECT_LE(op_grad_error(
                  b, [&](const Tensor<double>& x) { return matmul(a, x); },
                  [&](const Tensor<double>& d) { return matmul_backward(a, b, d).db; }, rng),
              kGradTol);
  }
}

LayerParams<double> conv_params(std::size_t in, std::size_t out, int k, int stride, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto p = LayerParams<double>::conv("test", in, out, k, stride, rng);
  for (double& v : p.bias.values()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  return p;
}

TEST(Conv2d, ZeroInputGivesBias) {
  auto p = conv_params(1, 2, 3, 1, 1);
  const auto y = conv2d(Tensor<double>({1, 3, 3}), p);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y[c * 9 + i], p.bias[c]);
  }
}

TEST(Conv2d, CenterTapKernelIsIdentity) {
  std::mt19937_64 rng(3);
  auto p = conv_params(1, 1, 3, 1, 2);
  std::fill(p.weights.values().begin(), p.weights.values().end(), 0.0);
  p.weights[4] = 1.0;
  p.bias[0] = 0.0;
  const auto x = random_tensor({1, 5, 4}, rng);
  EXPECT_EQ(conv2d(x, p), x);
}

TEST(Conv2d, OutputSizesAndChannelCheck) {
  std::mt19937_64 rng(4);
  auto same = conv_params(2, 3, 3, 1, 3);
  auto down = conv_params(2, 3, 3, 2, 4);
  const auto x = random_tensor({2, 7, 5}, rng);
  EXPECT_EQ(conv2d(x, same).shape(), (Shape{3, 7, 5}));
  EXPECT_EQ(conv2d(x, down).shape(), (Shape{3, 4, 3}));
  EXPECT_THROW(conv2d(random_tensor({3, 4, 4}, rng), same), DimensionError);
  EXPECT_THROW(LayerParams<double>::conv("bad", 1, 1, 5, 1, rng), ConfigError);
}

TEST(Conv2d, MatchesDirectLoop) {
  std::mt19937_64 rng(5);
  for (int stride : {1, 2}) {
    auto p = conv_params(2, 3, 3, stride, 6);
    const auto x = random_tensor({2, 6, 5}, rng);
    const auto y = conv2d(x, p);
    for (std::size_t o = 0; o < 3; ++o) {
      for (std::size_t i = 0; i < y.dim(1); ++i) {
        for (std::size_t j = 0; j < y.dim(2); ++j) {
          double s = p.bias[o];
          for (std::size_t c = 0; c < 2; ++c) {
            for (int di = 0; di < 3; ++di) {
              for (int dj = 0; dj < 3; ++dj) {
                const long r = static_cast<long>(i) * stride + di - 1, q = static_cast<long>(j) * stride + dj - 1;
                if (r < 0 || q < 0 || r >= 6 || q >= 5) continue;
                s += p.weights[((o * 2 + c) * 3 + static_cast<std::size_t>(di)) * 3 + static_cast<std::size_t>(dj)] *
                     x.at(c, static_cast<std::size_t>(r), static_cast<std::size_t>(q));
              }
            }
          }
          EXPECT_NEAR(y.at(o, i, j), s, 1e-12);
        }
      }
    }
  }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    for (auto [k, stride] : {std::pair{3, 1}, std::pair{3, 2}, std::pair{1, 1}}) {
      auto p = conv_params(2, 3, k, stride, static_cast<std::uint64_t>(trial + 20));
      Tensor<double> x = random_tensor({2, 5, 5}, rng);
      // Input gradient.
      EXPECT_LE(op_grad_error(
                    x, [&](const Tensor<double>& in) { return conv2d(in, p); },
                    [&](const Tensor<double>& d) {
                      auto q = p;
                      return conv2d_backward(x, q, d);
                    },
                    rng),
                kGradTol);
      // Weight and bias gradients.
      const Tensor<double> y = conv2d(x, p);
      const Tensor<double> r = random_tensor(y.shape(), rng);
      auto q = p;
      conv2d_backward(x, q, r);
      const Tensor<double> dw(p.weights.shape(), std::vector<double>(q.weights.grad().begin(), q.weights.grad().end()));
      const Tensor<double> db(p.bias.shape(), std::vector<double>(q.bias.grad().begin(), q.bias.grad().end()));
      EXPECT_LE(grad_check([&] { return testing::dot(r, conv2d(x, p)); }, p.weights, dw.data()).max_relative_error,
                kGradTol);
      EXPECT_LE(grad_check([&] { return testing::dot(r, conv2d(x, p)); }, p.bias, db.data()).max_relative_error,
                kGradTol);
    }
  }
}

TEST(Activation, Definitions) {
  const auto x = Tensor<double>({3}, std::vector<double>{-1, 0, 2});
  const auto r = activation(x, Activation::relu);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[2], 2.0);
  EXPECT_EQ(activation(x, Activation::sigmoid)[1], 0.5);
  EXPECT_EQ(activation(x, Activation::tanh)[1], 0.0);
}

TEST(Activation, RangesHold) {
  std::mt19937_64 rng(8);
  const auto x = random_tensor({200}, rng, -20, 20);
  for (double v : activation(x, Activation::relu).values()) EXPECT_GE(v, 0.0);
  for (double v : activation(x, Activation::tanh).values()) EXPECT_LE(std::abs(v), 1.0);
  for (double v : activation(x, Activation::sigmoid).values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Activation, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    for (auto kind : {Activation::relu, Activation::tanh, Activation::sigmoid}) {
      Tensor<double> x = random_tensor({4, 5}, rng, -3, 3);
      // Keep relu inputs away from the kink.
      if (kind == Activation::relu) {
        for (double& v : x.values()) v = v < 0 ? v - 0.1 : v + 0.1;
      }
      EXPECT_LE(op_grad_error(
                    x, [&](const Tensor<double>& in) { return activation(in, kind); },
                    [&](const Tensor<double>& d) { return activation_backward(activation(x, kind), d, kind); }, rng),
                kGradTol);
    }
  }
}

TEST(Softmax, ClosedFormsAndStability) {
  const auto u = softmax_rows(mat(1, 4, {2, 2, 2, 2}));
  for (double v : u.values()) EXPECT_DOUBLE_EQ(v, 0.25);
  const auto s = softmax_rows(mat(1, 2, {0, std::log(3.0)}));
  EXPECT_NEAR(s[0], 0.25, 1e-15);
  EXPECT_NEAR(s[1], 0.75, 1e-15);
  std::mt19937_64 rng(11);
  const auto big = softmax_rows(random_tensor({20, 6}, rng, -1e4, 1e4));
  for (std::size_t i = 0; i < 20; ++i) {
    double sum = 0;
    for (std::size_t j = 0; j < 6; ++j) sum += big.at(i, j);
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(Softmax, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> x = random_tensor({3, 4}, rng, -2, 2);
    EXPECT_LE(op_grad_error(
                  x, [](const Tensor<double>& in) { return softmax_rows(in); },
                  [&](const Tensor<double>& d) { return softmax_rows_backward(softmax_rows(x), d); }, rng),
              kGradTol);
  }
}

TEST(Upsample, ConstantAndDegenerateMaps) {
  const auto c = upsample_bilinear_x2(Tensor<double>({2, 3, 2}, 0.7));
  EXPECT_EQ(c.shape(), (Shape{2, 6, 4}));
  for (double v : c.values()) EXPECT_NEAR(v, 0.7, 1e-15);
  const auto one = upsample_bilinear_x2(Tensor<double>({1, 1, 1}, 4.0));
  EXPECT_EQ(one, Tensor<double>({1, 2, 2}, 4.0));
}

TEST(Upsample, HalfPixelWeights) {
  // Row [0, 4]: outputs sample at -0.25, 0.25, 0.75, 1.25 in input coordinates,
  // clamped at the borders.
  const auto y = upsample_bilinear_x2(Tensor<double>({1, 1, 2}, std::vector<double>{0, 4}));
  EXPECT_NEAR(y.at(0, 0, 0), 0.0, 1e-15);
  EXPECT_NEAR(y.at(0, 0, 1), 1.0, 1e-15);
  EXPECT_NEAR(y.at(0, 0, 2), 3.0, 1e-15);
  EXPECT_NEAR(y.at(0, 0, 3), 4.0, 1e-15);
}

TEST(Upsample, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> x = random_tensor({1 + static_cast<std::size_t>(trial % 2), 3, 3}, rng);
    EXPECT_LE(op_grad_error(
                  x, [](const Tensor<double>& in) { return upsample_bilinear_x2(in); },
                  [&](const Tensor<double>& d) { return upsample_bilinear_x2_backward(d, 3, 3); }, rng),
              kGradTol);
  }
}

TEST(Reshapes, CropAndRowLayoutsRoundTrip) {
  std::mt19937_64 rng(14);
  const auto x = random_tensor({6, 3, 2}, rng);
  const auto rows = channels_to_rows(x, 3);
  EXPECT_EQ(rows.shape(), (Shape{18, 2}));
  // Row (i*W + j)*G + g holds channels g*D .. g*D+D-1 at cell (i, j).
  EXPECT_EQ(rows.at((1 * 2 + 1) * 3 + 2, 1), x.at(2 * 2 + 1, 1, 1));
  EXPECT_EQ(rows_to_channels(rows, 3, 3, 2), x);
  EXPECT_EQ(hwc_to_chw(chw_to_hwc(x)), x);
  EXPECT_EQ(chw_to_hwc(x).at(2, 1, 4), x.at(4, 2, 1));
  const auto crop = crop_spatial(x, 2, 1);
  EXPECT_EQ(crop.shape(), (Shape{6, 2, 1}));
  EXPECT_EQ(crop.at(5, 1, 0), x.at(5, 1, 0));
}

TEST(Reshapes, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> x = random_tensor({4, 3, 5}, rng);
    EXPECT_LE(op_grad_error(
                  x, [](const Tensor<double>& in) { return crop_spatial(in, 2, 4); },
                  [](const Tensor<double>& d) { return crop_spatial_backward(d, 3, 5); }, rng),
              kGradTol);
    EXPECT_LE(op_grad_error(
                  x, [](const Tensor<double>& in) { return channels_to_rows(in, 2); },
                  [](const Tensor<double>& d) { return rows_to_channels(d, 2, 3, 5); }, rng),
              kGradTol);
    EXPECT_LE(op_grad_error(
                  x, [](const Tensor<double>& in) { return chw_to_hwc(in); },
                  [](const Tensor<double>& d) { return hwc_to_chw(d); }, rng),
              kGradTol);
    Tensor<double> b = random_tensor(x.shape(), rng);
    EXPECT_LE(op_grad_error(
                  x, [&](const Tensor<double>& in) { return add(in, b); },
                  [](const Tensor<double>& d) { return d; }, rng),
              kGradTol);
  }
}

TEST(Layers, FloatAndDoubleAgree) {
  std::mt19937_64 rng(16);
  auto p = conv_params(3, 4, 3, 2, 17);
  const auto x = random_tensor({3, 8, 8}, rng);
  const auto y64 = conv2d(x, p);
  const auto y32 = conv2d(x.cast<float>(), p.cast<float>());
  for (std::size_t i = 0; i < y64.size(); ++i) EXPECT_NEAR(y32[i], y64[i], 1e-5);
}

}  // namespace
}  // namespace protomask
