// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#include "protomask/layers.hpp"

#include <Eigen/Core>
#include <cmath>

namespace protomask {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
ConstMatrixMap<T> as_matrix(const Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap<T>(t.data().data(), static_cast<Eigen::Index>(rows),
                           static_cast<Eigen::Index>(cols));
}

template <typename T>
MatrixMap<T> as_matrix(Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return MatrixMap<T>(t.data().data(), static_cast<Eigen::Index>(rows),
                      static_cast<Eigen::Index>(cols));
}

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(shape));
  }
}

struct ConvGeometry {
  std::size_t in_c, in_h, in_w, out_h, out_w;
  int kernel, stride, padding;

  bool is_pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
  std::size_t col_rows() const { return in_c * static_cast<std::size_t>(kernel * kernel); }
  std::size_t col_cols() const { return out_h * out_w; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const LayerParams<T>& p) {
  require_rank(x.shape(), 3, "conv2d");
  if (x.dim(0) != p.in_channels()) {
    throw DimensionError("conv2d " + p.name + ": input has " + std::to_string(x.dim(0)) +
                         " channels, layer expects " + std::to_string(p.in_channels()));
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), 0, 0, p.kernel, p.stride, p.padding};
  g.out_h = conv_output_size(g.in_h, p.kernel, p.stride, p.padding);
  g.out_w = conv_output_size(g.in_w, p.kernel, p.stride, p.padding);
  return g;
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t k = static_cast<std::size_t>(g.kernel);
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    const T* xc = x + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* dst = col + ((c * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.padding;
          T* row = dst + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
            std::fill(row, row + g.out_w, T{0});
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.padding;
            row[ox] = (ix < 0 || ix >= static_cast<long>(g.in_w)) ? T{0}
                                                                 : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* dx) {
  const std::size_t k = static_cast<std::size_t>(g.kernel);
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    T* dxc = dx + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* src = col + ((c * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.padding;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          T* dst = dxc + static_cast<std::size_t>(iy) * g.in_w;
          const T* row = src + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.padding;
            if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
            dst[static_cast<std::size_t>(ix)] += row[ox];
          }
        }
      }
    }
  }
}

// Source index pair and weights for one output coordinate of a x2 bilinear
// upsample (align_corners = false).
struct BilinearTap {
  std::size_t i0, i1;
  double w0, w1;
};

std::vector<BilinearTap> bilinear_taps(std::size_t in) {
  std::vector<BilinearTap> taps(in * 2);
  for (std::size_t o = 0; o < taps.size(); ++o) {
    double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    if (src < 0.0) src = 0.0;
    auto i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    const double frac = src - static_cast<double>(i0);
    taps[o] = {i0, i1, 1.0 - frac, frac};
  }
  return taps;
}

}  // namespace

std::size_t conv_output_size(std::size_t input, int kernel, int stride, int padding) {
  const long span = static_cast<long>(input) + 2L * padding - kernel;
  if (span < 0 || stride <= 0) throw DimensionError("convolution window larger than input");
  return static_cast<std::size_t>(span / stride + 1);
}

template <typename T>
LayerParams<T> LayerParams<T>::conv(std::string name, std::size_t in_channels,
                                    std::size_t out_channels, int kernel, int stride,
                                    std::mt19937_64& rng) {
  if (kernel != 1 && kernel != 3) {
    throw ConfigError("layer " + name + ": only 1x1 and 3x3 kernels are supported");
  }
  if (stride != 1 && stride != 2) throw ConfigError("layer " + name + ": stride must be 1 or 2");
  LayerParams p;
  p.name = std::move(name);
  p.kernel = kernel;
  p.stride = stride;
  p.padding = kernel / 2;
  const auto k = static_cast<std::size_t>(kernel);
  p.weights = Tensor<T>({out_channels, in_channels, k, k});
  p.bias = Tensor<T>({out_channels});
  const double fan_in = static_cast<double>(in_channels * k * k);
  const double bound = std::sqrt(6.0 / fan_in);
  // Raw 53-bit draws keep initialisation identical across standard libraries.
  for (auto& w : p.weights.data()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    w = static_cast<T>((2.0 * u - 1.0) * bound);
  }
  return p;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor<T> out({a.dim(0), b.dim(1)});
  as_matrix(out, a.dim(0), b.dim(1)).noalias() =
      as_matrix(a, a.dim(0), a.dim(1)) * as_matrix(b, b.dim(0), b.dim(1));
  return out;
}

template <typename T>
MatmulGrads<T> matmul_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& dout) {
  if (dout.rank() != 2 || dout.dim(0) != a.dim(0) || dout.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_backward: upstream gradient has shape " +
                         shape_string(dout.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  MatmulGrads<T> g{Tensor<T>(a.shape()), Tensor<T>(b.shape())};
  as_matrix(g.da, m, k).noalias() = as_matrix(dout, m, n) * as_matrix(b, k, n).transpose();
  as_matrix(g.db, k, n).noalias() = as_matrix(a, m, k).transpose() * as_matrix(dout, m, n);
  return g;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const LayerParams<T>& p) {
  const ConvGeometry g = conv_geometry(x, p);
  const std::size_t out_c = p.out_channels();
  Tensor<T> out({out_c, g.out_h, g.out_w});
  auto weights = as_matrix(p.weights, out_c, g.col_rows());
  auto result = as_matrix(out, out_c, g.col_cols());
  if (g.is_pointwise()) {
    result.noalias() = weights * as_matrix(x, g.col_rows(), g.col_cols());
  } else {
    std::vector<T> col(g.col_rows() * g.col_cols());
    im2col(x.data().data(), g, col.data());
    result.noalias() =
        weights * ConstMatrixMap<T>(col.data(), static_cast<Eigen::Index>(g.col_rows()),
                                    static_cast<Eigen::Index>(g.col_cols()));
  }
  for (std::size_t c = 0; c < out_c; ++c) result.row(static_cast<Eigen::Index>(c)).array() += p.bias[c];
  return out;
}

template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& x, LayerParams<T>& p, const Tensor<T>& dout) {
  const ConvGeometry g = conv_geometry(x, p);
  const std::size_t out_c = p.out_channels();
  if (dout.shape() != Shape{out_c, g.out_h, g.out_w}) {
    throw DimensionError("conv2d_backward " + p.name + ": upstream gradient has shape " +
                         shape_string(dout.shape()));
  }
  auto d = as_matrix(dout, out_c, g.col_cols());
  MatrixMap<T> dw(p.weights.ensure_grad().data(), static_cast<Eigen::Index>(out_c),
                  static_cast<Eigen::Index>(g.col_rows()));
  auto db = p.bias.ensure_grad();
  // Plain loop: Eigen's vectorized sum peels by address, which would make the
  // result depend on where the buffer happens to be allocated.
  for (std::size_t c = 0; c < out_c; ++c) {
    const T* row = dout.data().data() + c * g.col_cols();
    T sum{0};
    for (std::size_t i = 0; i < g.col_cols(); ++i) sum += row[i];
    db[c] += sum;
  }

  auto weights = as_matrix(p.weights, out_c, g.col_rows());
  Tensor<T> dx(x.shape());
  if (g.is_pointwise()) {
    dw.noalias() += d * as_matrix(x, g.col_rows(), g.col_cols()).transpose();
    as_matrix(dx, g.col_rows(), g.col_cols()).noalias() = weights.transpose() * d;
    return dx;
  }
  std::vector<T> col(g.col_rows() * g.col_cols());
  im2col(x.data().data(), g, col.data());
  MatrixMap<T> col_m(col.data(), static_cast<Eigen::Index>(g.col_rows()),
                     static_cast<Eigen::Index>(g.col_cols()));
  dw.noalias() += d * col_m.transpose();
  col_m.noalias() = weights.transpose() * d;
  col2im(col.data(), g, dx.data().data());
  return dx;
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  Tensor<T> y(x.shape());
  auto in = x.data();
  auto out = y.data();
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T{0} ? in[i] : T{0};
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = T{1} / (T{1} + std::exp(-in[i]));
      break;
  }
  return y;
}

template <typename T>
Tensor<T> activation_backward(const Tensor<T>& y, const Tensor<T>& dout, Activation kind) {
  if (y.shape() != dout.shape()) throw DimensionError("activation_backward: shape mismatch");
  Tensor<T> dx(y.shape());
  auto out = y.data();
  auto g = dout.data();
  auto d = dx.data();
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < out.size(); ++i) d[i] = out[i] > T{0} ? g[i] : T{0};
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < out.size(); ++i) d[i] = g[i] * (T{1} - out[i] * out[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) d[i] = g[i] * out[i] * (T{1} - out[i]);
      break;
  }
  return dx;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  require_rank(x.shape(), 2, "softmax_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * cols;
    T* out = y.data().data() + r * cols;
    const T peak = *std::max_element(in, in + cols);
    T total{0};
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = std::exp(in[c] - peak);
      total += out[c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[c] /= total;
  }
  return y;
}

template <typename T>
Tensor<T> softmax_rows_backward(const Tensor<T>& y, const Tensor<T>& dout) {
  if (y.shape() != dout.shape()) throw DimensionError("softmax_rows_backward: shape mismatch");
  const std::size_t rows = y.dim(0), cols = y.dim(1);
  Tensor<T> dx(y.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* s = y.data().data() + r * cols;
    const T* g = dout.data().data() + r * cols;
    T dot{0};
    for (std::size_t c = 0; c < cols; ++c) dot += s[c] * g[c];
    T* d = dx.data().data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) d[c] = s[c] * (g[c] - dot);
  }
  return dx;
}

template <typename T>
Tensor<T> upsample_bilinear_x2(const Tensor<T>& x) {
  require_rank(x.shape(), 3, "upsample_bilinear_x2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto rows = bilinear_taps(h);
  const auto cols = bilinear_taps(w);
  Tensor<T> y({c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* src = x.data().data() + ch * h * w;
    T* dst = y.data().data() + ch * 4 * h * w;
    for (std::size_t oy = 0; oy < 2 * h; ++oy) {
      const auto& ry = rows[oy];
      for (std::size_t ox = 0; ox < 2 * w; ++ox) {
        const auto& rx = cols[ox];
        const double v = ry.w0 * (rx.w0 * src[ry.i0 * w + rx.i0] + rx.w1 * src[ry.i0 * w + rx.i1]) +
                         ry.w1 * (rx.w0 * src[ry.i1 * w + rx.i0] + rx.w1 * src[ry.i1 * w + rx.i1]);
        dst[oy * 2 * w + ox] = static_cast<T>(v);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample_bilinear_x2_backward(const Tensor<T>& dout, std::size_t in_h, std::size_t in_w) {
  require_rank(dout.shape(), 3, "upsample_bilinear_x2_backward");
  if (dout.dim(1) != 2 * in_h || dout.dim(2) != 2 * in_w) {
    throw DimensionError("upsample_bilinear_x2_backward: gradient shape " +
                         shape_string(dout.shape()));
  }
  const std::size_t c = dout.dim(0);
  const auto rows = bilinear_taps(in_h);
  const auto cols = bilinear_taps(in_w);
  Tensor<T> dx({c, in_h, in_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* g = dout.data().data() + ch * 4 * in_h * in_w;
    T* d = dx.data().data() + ch * in_h * in_w;
    for (std::size_t oy = 0; oy < 2 * in_h; ++oy) {
      const auto& ry = rows[oy];
      for (std::size_t ox = 0; ox < 2 * in_w; ++ox) {
        const auto& rx = cols[ox];
        const double v = g[oy * 2 * in_w + ox];
        d[ry.i0 * in_w + rx.i0] += static_cast<T>(ry.w0 * rx.w0 * v);
        d[ry.i0 * in_w + rx.i1] += static_cast<T>(ry.w0 * rx.w1 * v);
        d[ry.i1 * in_w + rx.i0] += static_cast<T>(ry.w1 * rx.w0 * v);
        d[ry.i1 * in_w + rx.i1] += static_cast<T>(ry.w1 * rx.w1 * v);
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor<T> out = a;
  auto o = out.data();
  auto r = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += r[i];
  return out;
}

template <typename T>
Tensor<T> crop_spatial(const Tensor<T>& x, std::size_t h, std::size_t w) {
  require_rank(x.shape(), 3, "crop_spatial");
  if (h > x.dim(1) || w > x.dim(2)) throw DimensionError("crop_spatial: window larger than map");
  const std::size_t c = x.dim(0), full_w = x.dim(2), full_h = x.dim(1);
  Tensor<T> out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) out.at(ch, i, j) = x[(ch * full_h + i) * full_w + j];
  return out;
}

template <typename T>
Tensor<T> crop_spatial_backward(const Tensor<T>& dout, std::size_t full_h, std::size_t full_w) {
  require_rank(dout.shape(), 3, "crop_spatial_backward");
  const std::size_t c = dout.dim(0), h = dout.dim(1), w = dout.dim(2);
  Tensor<T> dx({c, full_h, full_w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) dx.at(ch, i, j) = dout[(ch * h + i) * w + j];
  return dx;
}

template <typename T>
Tensor<T> channels_to_rows(const Tensor<T>& x, std::size_t groups) {
  require_rank(x.shape(), 3, "channels_to_rows");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (groups == 0 || c % groups != 0) throw DimensionError("channels_to_rows: bad group count");
  const std::size_t depth = c / groups;
  Tensor<T> out({h * w * groups, depth});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t g = ch / depth, d = ch % depth;
    for (std::size_t p = 0; p < h * w; ++p) out[(p * groups + g) * depth + d] = x[ch * h * w + p];
  }
  return out;
}

template <typename T>
Tensor<T> rows_to_channels(const Tensor<T>& rows, std::size_t groups, std::size_t h, std::size_t w) {
  require_rank(rows.shape(), 2, "rows_to_channels");
  if (rows.dim(0) != h * w * groups) throw DimensionError("rows_to_channels: row count mismatch");
  const std::size_t depth = rows.dim(1);
  Tensor<T> out({groups * depth, h, w});
  for (std::size_t ch = 0; ch < groups * depth; ++ch) {
    const std::size_t g = ch / depth, d = ch % depth;
    for (std::size_t p = 0; p < h * w; ++p) out[ch * h * w + p] = rows[(p * groups + g) * depth + d];
  }
  return out;
}

template <typename T>
Tensor<T> chw_to_hwc(const Tensor<T>& x) {
  require_rank(x.shape(), 3, "chw_to_hwc");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> out({h, w, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < h * w; ++p) out[p * c + ch] = x[ch * h * w + p];
  return out;
}

template <typename T>
Tensor<T> hwc_to_chw(const Tensor<T>& x) {
  require_rank(x.shape(), 3, "hwc_to_chw");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor<T> out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < h * w; ++p) out[ch * h * w + p] = x[p * c + ch];
  return out;
}

#define PROTOMASK_INSTANTIATE_LAYERS(T)                                                           \
  template struct LayerParams<T>;                                                                 \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template MatmulGrads<T> matmul_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> conv2d(const Tensor<T>&, const LayerParams<T>&);                             \
  template Tensor<T> conv2d_backward(const Tensor<T>&, LayerParams<T>&, const Tensor<T>&);        \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                    \
  template Tensor<T> activation_backward(const Tensor<T>&, const Tensor<T>&, Activation);         \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                              \
  template Tensor<T> softmax_rows_backward(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> upsample_bilinear_x2(const Tensor<T>&);                                      \
  template Tensor<T> upsample_bilinear_x2_backward(const Tensor<T>&, std::size_t, std::size_t);   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> crop_spatial(const Tensor<T>&, std::size_t, std::size_t);                    \
  template Tensor<T> crop_spatial_backward(const Tensor<T>&, std::size_t, std::size_t);           \
  template Tensor<T> channels_to_rows(const Tensor<T>&, std::size_t);                             \
  template Tensor<T> rows_to_channels(const Tensor<T>&, std::size_t, std::size_t, std::size_t);   \
  template Tensor<T> chw_to_hwc(const Tensor<T>&);                                                \
  template Tensor<T> hwc_to_chw(const Tensor<T>&);

PROTOMASK_INSTANTIATE_LAYERS(float)
PROTOMASK_INSTANTIATE_LAYERS(double)

}  // namespace protomask
