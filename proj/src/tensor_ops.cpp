// SPDX-License-Identifier: Apache-2.0
#include "hsnet/tensor_ops.hpp"

#include <algorithm>
#include <cmath>

namespace hsnet {
namespace {

// Source taps of one resized axis under half-pixel sampling.
struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

AxisTaps make_taps(std::size_t in, std::size_t out) {
  AxisTaps taps;
  taps.lo.resize(out);
  taps.hi.resize(out);
  taps.frac.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::max(src, 0.0);
    auto lo = std::min(static_cast<std::size_t>(src), in - 1);
    taps.lo[d] = lo;
    taps.hi[d] = std::min(lo + 1, in - 1);
    taps.frac[d] = src - static_cast<double>(lo);
  }
  return taps;
}

void check_resize_args(const Shape& dims, std::size_t out_h, std::size_t out_w) {
  if (dims.size() < 3) throw Error(ErrorCode::kInvalidShape, "bilinear_resize needs rank >= 3");
  if (out_h == 0 || out_w == 0) throw Error(ErrorCode::kInvalidShape, "bilinear_resize: zero target extent");
}

}  // namespace

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& src, std::size_t out_h, std::size_t out_w) {
  check_resize_args(src.dims(), out_h, out_w);
  const std::size_t channels = src.dim(0), in_h = src.dim(1), in_w = src.dim(2);
  const std::size_t inner = src.size() / (channels * in_h * in_w);
  Shape out_dims = src.dims();
  out_dims[1] = out_h;
  out_dims[2] = out_w;
  Tensor<T> out(out_dims);
  const AxisTaps ty = make_taps(in_h, out_h);
  const AxisTaps tx = make_taps(in_w, out_w);
  const T* s = src.data();
  T* o = out.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const T wy = static_cast<T>(ty.frac[y]);
      const T* row0 = s + (c * in_h + ty.lo[y]) * in_w * inner;
      const T* row1 = s + (c * in_h + ty.hi[y]) * in_w * inner;
      T* dst = o + (c * out_h + y) * out_w * inner;
      for (std::size_t x = 0; x < out_w; ++x) {
        const T wx = static_cast<T>(tx.frac[x]);
        const std::size_t x0 = tx.lo[x] * inner, x1 = tx.hi[x] * inner;
        for (std::size_t r = 0; r < inner; ++r) {
          // Lerp form keeps constant inputs exact.
          const T top = row0[x0 + r] + wx * (row0[x1 + r] - row0[x0 + r]);
          const T bot = row1[x0 + r] + wx * (row1[x1 + r] - row1[x0 + r]);
          dst[x * inner + r] = top + wy * (bot - top);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> bilinear_resize_backward(const Tensor<T>& grad_out, std::size_t in_h, std::size_t in_w) {
  check_resize_args(grad_out.dims(), in_h, in_w);
  const std::size_t channels = grad_out.dim(0), out_h = grad_out.dim(1), out_w = grad_out.dim(2);
  const std::size_t inner = grad_out.size() / (channels * out_h * out_w);
  Shape in_dims = grad_out.dims();
  in_dims[1] = in_h;
  in_dims[2] = in_w;
  Tensor<T> grad(in_dims);
  const AxisTaps ty = make_taps(in_h, out_h);
  const AxisTaps tx = make_taps(in_w, out_w);
  const T* g = grad_out.data();
  T* gi = grad.data();

#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const T wy = static_cast<T>(ty.frac[y]);
      T* row0 = gi + (c * in_h + ty.lo[y]) * in_w * inner;
      T* row1 = gi + (c * in_h + ty.hi[y]) * in_w * inner;
      const T* src = g + (c * out_h + y) * out_w * inner;
      for (std::size_t x = 0; x < out_w; ++x) {
        const T wx = static_cast<T>(tx.frac[x]);
        const std::size_t x0 = tx.lo[x] * inner, x1 = tx.hi[x] * inner;
        for (std::size_t r = 0; r < inner; ++r) {
          const T v = src[x * inner + r];
          row0[x0 + r] += (1 - wy) * (1 - wx) * v;
          row0[x1 + r] += (1 - wy) * wx * v;
          row1[x0 + r] += wy * (1 - wx) * v;
          row1[x1 + r] += wy * wx * v;
        }
      }
    }
  }
  return grad;
}

template <typename T>
Tensor<T> avg_pool_support_dims(const Tensor<T>& t) {
  require_rank(t, 5, "avg_pool_support_dims");
  const std::size_t outer = t.dim(0) * t.dim(1) * t.dim(2);
  const std::size_t window = t.dim(3) * t.dim(4);
  Tensor<T> out({t.dim(0), t.dim(1), t.dim(2)});
  const T* s = t.data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < outer; ++i) {
    T acc = 0;
    for (std::size_t k = 0; k < window; ++k) acc += s[i * window + k];
    out[i] = acc / static_cast<T>(window);
  }
  return out;
}

template <typename T>
Tensor<T> avg_pool_support_dims_backward(const Tensor<T>& grad_out, std::size_t hs, std::size_t ws) {
  require_rank(grad_out, 3, "avg_pool_support_dims_backward");
  Tensor<T> grad({grad_out.dim(0), grad_out.dim(1), grad_out.dim(2), hs, ws});
  const std::size_t window = hs * ws;
  const T inv = T{1} / static_cast<T>(window);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    std::fill_n(grad.data() + i * window, window, grad_out[i] * inv);
  }
  return grad;
}

template <typename T>
Tensor<T> softmax_channel(const Tensor<T>& logits) {
  require_rank(logits, 3, "softmax_channel");
  const std::size_t channels = logits.dim(0);
  if (channels < 2) throw Error(ErrorCode::kInvalidShape, "softmax_channel needs >= 2 channels");
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  Tensor<T> out(logits.dims());
  const T* l = logits.data();
  T* o = out.data();
#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < plane; ++p) {
    T peak = l[p];
    for (std::size_t c = 1; c < channels; ++c) peak = std::max(peak, l[c * plane + p]);
    T total = 0;
    for (std::size_t c = 0; c < channels; ++c) {
      o[c * plane + p] = std::exp(l[c * plane + p] - peak);
      total += o[c * plane + p];
    }
    for (std::size_t c = 0; c < channels; ++c) o[c * plane + p] /= total;
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.values()) v = v > 0 ? v : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& x) {
  require_same_shape(grad_out, x, "relu_backward");
  Tensor<T> grad = grad_out;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(x[i] > 0)) grad[i] = 0;
  }
  return grad;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a;
  accumulate(out, b);
  return out;
}

template <typename T>
void accumulate(Tensor<T>& a, const Tensor<T>& b, T scale) {
  require_same_shape(a, b, "accumulate");
  T* pa = a.data();
  const T* pb = b.data();
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) pa[i] += scale * pb[i];
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  T worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

#define HSNET_INSTANTIATE(T)                                                                   \
  template Tensor<T> bilinear_resize(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> bilinear_resize_backward(const Tensor<T>&, std::size_t, std::size_t);     \
  template Tensor<T> avg_pool_support_dims(const Tensor<T>&);                                  \
  template Tensor<T> avg_pool_support_dims_backward(const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> softmax_channel(const Tensor<T>&);                                        \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template void accumulate(Tensor<T>&, const Tensor<T>&, T);                                   \
  template T max_abs_diff(const Tensor<T>&, const Tensor<T>&);

HSNET_INSTANTIATE(float)
HSNET_INSTANTIATE(double)
#undef HSNET_INSTANTIATE

}  // namespace hsnet
