// SPDX-License-Identifier: Apache-2.0
#include "hsnet/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "hsnet/correlation.hpp"

namespace hsnet::reference {
namespace {

using Index = std::ptrdiff_t;

bool inside(Index v, std::size_t n) { return v >= 0 && static_cast<std::size_t>(v) < n; }

std::size_t extent(std::size_t n, std::size_t k, std::size_t s) { return (n + 2 * (k / 2) - k) / s + 1; }

}  // namespace

template <typename T>
Tensor<T> support_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Stride4 st) {
  const std::size_t cout = w.dim(0), cin = x.dim(0), k = w.dim(2);
  const Index p = static_cast<Index>(k / 2);
  Tensor<T> out({cout, extent(x.dim(1), k, st.query_h), extent(x.dim(2), k, st.query_w),
                 extent(x.dim(3), k, st.support_h), extent(x.dim(4), k, st.support_w)});
  for (std::size_t o = 0; o < out.dim(0); ++o)
    for (std::size_t i = 0; i < out.dim(1); ++i)
      for (std::size_t j = 0; j < out.dim(2); ++j)
        for (std::size_t a = 0; a < out.dim(3); ++a)
          for (std::size_t b = 0; b < out.dim(4); ++b) {
            T acc = bias.empty() ? T{0} : bias[o];
            for (std::size_t c = 0; c < cin; ++c)
              for (std::size_t u = 0; u < k; ++u)
                for (std::size_t v = 0; v < k; ++v) {
                  const Index s1 = static_cast<Index>(a * st.support_h + u) - p;
                  const Index s2 = static_cast<Index>(b * st.support_w + v) - p;
                  if (!inside(s1, x.dim(3)) || !inside(s2, x.dim(4))) continue;
                  acc += w(o, c, u, v) * x(c, i * st.query_h, j * st.query_w, s1, s2);
                }
            out(o, i, j, a, b) = acc;
          }
  return out;
}

template <typename T>
Tensor<T> query_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Stride4 st) {
  const std::size_t cout = w.dim(0), cin = x.dim(0), k = w.dim(2);
  const Index p = static_cast<Index>(k / 2);
  Tensor<T> out({cout, extent(x.dim(1), k, st.query_h), extent(x.dim(2), k, st.query_w),
                 extent(x.dim(3), k, st.support_h), extent(x.dim(4), k, st.support_w)});
  for (std::size_t o = 0; o < out.dim(0); ++o)
    for (std::size_t i = 0; i < out.dim(1); ++i)
      for (std::size_t j = 0; j < out.dim(2); ++j)
        for (std::size_t a = 0; a < out.dim(3); ++a)
          for (std::size_t b = 0; b < out.dim(4); ++b) {
            T acc = bias.empty() ? T{0} : bias[o];
            for (std::size_t c = 0; c < cin; ++c)
              for (std::size_t u = 0; u < k; ++u)
                for (std::size_t v = 0; v < k; ++v) {
                  const Index q1 = static_cast<Index>(i * st.query_h + u) - p;
                  const Index q2 = static_cast<Index>(j * st.query_w + v) - p;
                  if (!inside(q1, x.dim(1)) || !inside(q2, x.dim(2))) continue;
                  acc += w(o, c, u, v) * x(c, q1, q2, a * st.support_h, b * st.support_w);
                }
            out(o, i, j, a, b) = acc;
          }
  return out;
}

template <typename T>
Tensor<T> conv4d_center_pivot(const Tensor<T>& x, const Kernel4d<T>& k, const Conv4dConfig& cfg) {
  const Shape od = cfg.output_dims(x.dims());
  const std::size_t n = cfg.kernel;
  const Index p = static_cast<Index>(cfg.padding());
  const Stride4 st = cfg.stride;
  Tensor<T> out(od);
  for (std::size_t o = 0; o < od[0]; ++o)
    for (std::size_t i = 0; i < od[1]; ++i)
      for (std::size_t j = 0; j < od[2]; ++j)
        for (std::size_t a = 0; a < od[3]; ++a)
          for (std::size_t b = 0; b < od[4]; ++b) {
            // Output (x, x') reads input centers x = (i*sq, j*sq), x' = (a*ss, b*ss).
            const std::size_t xq1 = i * st.query_h, xq2 = j * st.query_w;
            const std::size_t xs1 = a * st.support_h, xs2 = b * st.support_w;
            T acc = 0;
            if (cfg.bias) acc = k.support_bias[o] + k.query_bias[o];
            for (std::size_t c = 0; c < cfg.in_channels; ++c)
              for (std::size_t u = 0; u < n; ++u)
                for (std::size_t v = 0; v < n; ++v) {
                  // sum over p' in P(x') of c(x, p') k_c(p' - x')
                  const Index s1 = static_cast<Index>(xs1 + u) - p, s2 = static_cast<Index>(xs2 + v) - p;
                  if (inside(s1, x.dim(3)) && inside(s2, x.dim(4))) {
                    acc += x(c, xq1, xq2, s1, s2) * k.support_weight(o, c, u, v);
                  }
                  // sum over p in P(x) of c(p, x') k_c'(p - x)
                  const Index q1 = static_cast<Index>(xq1 + u) - p, q2 = static_cast<Index>(xq2 + v) - p;
                  if (inside(q1, x.dim(1)) && inside(q2, x.dim(2))) {
                    acc += x(c, q1, q2, xs1, xs2) * k.query_weight(o, c, u, v);
                  }
                }
            out(o, i, j, a, b) = acc;
          }
  return out;
}

template <typename T>
Tensor<T> correlation_4d(const Tensor<T>& query, const Tensor<T>& support) {
  const std::size_t channels = query.dim(0), h = query.dim(1), w = query.dim(2);
  Tensor<T> out({h, w, h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t a = 0; a < h; ++a)
        for (std::size_t b = 0; b < w; ++b) {
          double dot = 0, nq = 0, ns = 0;
          for (std::size_t c = 0; c < channels; ++c) {
            const double q = query(c, i, j), s = support(c, a, b);
            dot += q * s;
            nq += q * q;
            ns += s * s;
          }
          nq = std::sqrt(nq);
          ns = std::sqrt(ns);
          double cosine = 0;
          if (nq >= kZeroNormThreshold && ns >= kZeroNormThreshold) cosine = dot / (nq * ns);
          out(i, j, a, b) = static_cast<T>(std::clamp(cosine, 0.0, 1.0));
        }
  return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  const std::size_t cout = w.dim(0), cin = x.dim(0), h = x.dim(1), wd = x.dim(2), k = w.dim(2);
  const Index p = static_cast<Index>(k / 2);
  Tensor<T> out({cout, h, wd});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < wd; ++xx) {
        T acc = bias.empty() ? T{0} : bias[o];
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t u = 0; u < k; ++u)
            for (std::size_t v = 0; v < k; ++v) {
              const Index yy = static_cast<Index>(y + u) - p, xs = static_cast<Index>(xx + v) - p;
              if (inside(yy, h) && inside(xs, wd)) acc += w(o, c, u, v) * x(c, yy, xs);
            }
        out(o, y, xx) = acc;
      }
  return out;
}

#define HSNET_INSTANTIATE(T)                                                                              \
  template Tensor<T> support_conv(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Stride4);         \
  template Tensor<T> query_conv(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Stride4);           \
  template Tensor<T> conv4d_center_pivot(const Tensor<T>&, const Kernel4d<T>&, const Conv4dConfig&);      \
  template Tensor<T> correlation_4d(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

HSNET_INSTANTIATE(float)
HSNET_INSTANTIATE(double)
#undef HSNET_INSTANTIATE

}  // namespace hsnet::reference
