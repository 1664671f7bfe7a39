// SPDX-License-Identifier: Apache-2.0
#include "hsnet/conv4d.hpp"

#include <algorithm>
#include <cstddef>
#include <vector>

#include "hsnet/tensor_ops.hpp"

namespace hsnet {
namespace {

using Index = std::ptrdiff_t;

struct Geometry {
  std::size_t cin, hq, wq, hs, ws;
  std::size_t cout, k, pad;
  std::size_t oqh, oqw, osh, osw;
  Stride4 st;

  std::size_t out_positions() const { return oqh * oqw * osh * osw; }
  std::size_t support_plane() const { return osh * osw; }
};

std::size_t strided_extent(std::size_t n, std::size_t k, std::size_t s) {
  return (n + 2 * (k / 2) - k) / s + 1;
}

void check_stride(const Stride4& st) {
  if (st.query_h == 0 || st.query_w == 0 || st.support_h == 0 || st.support_w == 0) {
    throw Error(ErrorCode::kInvalidSpec, "conv4d strides must be >= 1");
  }
}

template <typename T>
Geometry planar_geometry(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Stride4 st) {
  require_rank(x, 5, "planar conv input");
  require_rank(w, 4, "planar conv weight");
  check_stride(st);
  if (w.dim(1) != x.dim(0) || w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0) {
    throw Error(ErrorCode::kInvalidShape, "planar conv weight " + shape_string(w.dims()) +
                                              " does not fit input " + shape_string(x.dims()));
  }
  if (!bias.empty() && bias.dims() != Shape{w.dim(0)}) {
    throw Error(ErrorCode::kInvalidShape, "planar conv bias " + shape_string(bias.dims()));
  }
  Geometry g{};
  g.cin = x.dim(0);
  g.hq = x.dim(1);
  g.wq = x.dim(2);
  g.hs = x.dim(3);
  g.ws = x.dim(4);
  g.cout = w.dim(0);
  g.k = w.dim(2);
  g.pad = g.k / 2;
  g.st = st;
  g.oqh = strided_extent(g.hq, g.k, st.query_h);
  g.oqw = strided_extent(g.wq, g.k, st.query_w);
  g.osh = strided_extent(g.hs, g.k, st.support_h);
  g.osw = strided_extent(g.ws, g.k, st.support_w);
  return g;
}

// (Cout, Cin, k, k) -> [c][u][v][o] so the inner loop runs over output channels.
template <typename T>
std::vector<T> transpose_weight(const Tensor<T>& w) {
  const std::size_t cout = w.dim(0), rest = w.size() / cout;
  std::vector<T> wt(w.size());
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t r = 0; r < rest; ++r) wt[r * cout + o] = w[o * rest + r];
  }
  return wt;
}

template <typename T>
inline void axpy(T* dst, const T* src, T alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += alpha * src[i];
}

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline bool in_range(Index v, std::size_t n) { return v >= 0 && static_cast<std::size_t>(v) < n; }

template <typename T, bool kSupportPlane>
Tensor<T> planar_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Stride4 st) {
  const Geometry g = planar_geometry(x, w, bias, st);
  const std::vector<T> wt = transpose_weight(w);
  Tensor<T> out({g.cout, g.oqh, g.oqw, g.osh, g.osw});
  const std::size_t splane = g.support_plane();
  const std::size_t qplane = g.oqh * g.oqw;
  const std::size_t in_plane = g.hs * g.ws;
  const Index pad = static_cast<Index>(g.pad);
  const T* xd = x.data();
  T* od = out.data();

#pragma omp parallel
  {
    std::vector<T> acc(splane * g.cout);
#pragma omp for collapse(2) schedule(static)
    for (std::size_t i = 0; i < g.oqh; ++i) {
      for (std::size_t j = 0; j < g.oqw; ++j) {
        for (std::size_t s = 0; s < splane; ++s) {
          for (std::size_t o = 0; o < g.cout; ++o) acc[s * g.cout + o] = bias.empty() ? T{0} : bias[o];
        }
        for (std::size_t c = 0; c < g.cin; ++c) {
          if constexpr (kSupportPlane) {
            const T* plane = xd + ((c * g.hq + i * st.query_h) * g.wq + j * st.query_w) * in_plane;
            for (std::size_t a = 0; a < g.osh; ++a) {
              for (std::size_t u = 0; u < g.k; ++u) {
                const Index s1 = static_cast<Index>(a * st.support_h + u) - pad;
                if (!in_range(s1, g.hs)) continue;
                for (std::size_t b = 0; b < g.osw; ++b) {
                  T* ar = acc.data() + (a * g.osw + b) * g.cout;
                  for (std::size_t v = 0; v < g.k; ++v) {
                    const Index s2 = static_cast<Index>(b * st.support_w + v) - pad;
                    if (!in_range(s2, g.ws)) continue;
                    const T val = plane[s1 * static_cast<Index>(g.ws) + s2];
                    axpy(ar, wt.data() + ((c * g.k + u) * g.k + v) * g.cout, val, g.cout);
                  }
                }
              }
            }
          } else {
            for (std::size_t u = 0; u < g.k; ++u) {
              const Index qi = static_cast<Index>(i * st.query_h + u) - pad;
              if (!in_range(qi, g.hq)) continue;
              for (std::size_t v = 0; v < g.k; ++v) {
                const Index qj = static_cast<Index>(j * st.query_w + v) - pad;
                if (!in_range(qj, g.wq)) continue;
                const T* plane = xd + ((c * g.hq + qi) * g.wq + qj) * in_plane;
                const T* wrow = wt.data() + ((c * g.k + u) * g.k + v) * g.cout;
                for (std::size_t a = 0; a < g.osh; ++a) {
                  for (std::size_t b = 0; b < g.osw; ++b) {
                    const T val = plane[a * st.support_h * g.ws + b * st.support_w];
                    axpy(acc.data() + (a * g.osw + b) * g.cout, wrow, val, g.cout);
                  }
                }
              }
            }
          }
        }
        const std::size_t q = i * g.oqw + j;
        for (std::size_t o = 0; o < g.cout; ++o) {
          T* dst = od + (o * qplane + q) * splane;
          for (std::size_t s = 0; s < splane; ++s) dst[s] = acc[s * g.cout + o];
        }
      }
    }
  }
  return out;
}

// Input coordinate read by output (i, j, a, b) through tap (u, v); negative or
// past-the-end components mean the tap falls in the zero padding.
struct Tap {
  Index qi, qj, s1, s2;
};

template <bool kSupportPlane>
inline Tap tap_at(const Geometry& g, std::size_t i, std::size_t j, std::size_t a, std::size_t b, std::size_t u,
                  std::size_t v) {
  const Index pad = static_cast<Index>(g.pad);
  if constexpr (kSupportPlane) {
    return {static_cast<Index>(i * g.st.query_h), static_cast<Index>(j * g.st.query_w),
            static_cast<Index>(a * g.st.support_h + u) - pad, static_cast<Index>(b * g.st.support_w + v) - pad};
  } else {
    return {static_cast<Index>(i * g.st.query_h + u) - pad, static_cast<Index>(j * g.st.query_w + v) - pad,
            static_cast<Index>(a * g.st.support_h), static_cast<Index>(b * g.st.support_w)};
  }
}

inline bool tap_valid(const Geometry& g, const Tap& t) {
  return in_range(t.qi, g.hq) && in_range(t.qj, g.wq) && in_range(t.s1, g.hs) && in_range(t.s2, g.ws);
}

inline std::size_t input_offset(const Geometry& g, std::size_t c, const Tap& t) {
  return (((c * g.hq + static_cast<std::size_t>(t.qi)) * g.wq + static_cast<std::size_t>(t.qj)) * g.hs +
          static_cast<std::size_t>(t.s1)) *
             g.ws +
         static_cast<std::size_t>(t.s2);
}

template <typename T, bool kSupportPlane>
PlanarGrads<T> planar_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w, bool has_bias,
                               Stride4 st, bool need_input) {
  const Geometry g = planar_geometry(x, w, Tensor<T>{}, st);
  if (grad_out.dims() != Shape{g.cout, g.oqh, g.oqw, g.osh, g.osw}) {
    throw Error(ErrorCode::kInvalidShape, "planar conv grad " + shape_string(grad_out.dims()));
  }
  const std::size_t npos = g.out_positions();
  const std::size_t splane = g.support_plane();
  const T* gd = grad_out.data();
  const T* xd = x.data();

  // Position-major copy of the output gradient: gt[pos][o].
  std::vector<T> gt(npos * g.cout);
#pragma omp parallel for schedule(static)
  for (std::size_t p = 0; p < npos; ++p) {
    for (std::size_t o = 0; o < g.cout; ++o) gt[p * g.cout + o] = gd[o * npos + p];
  }

  PlanarGrads<T> grads;

  // Weight gradient, one (c, u, v) row per task.
  std::vector<T> gwt(g.cin * g.k * g.k * g.cout, T{0});
  const std::size_t taps = g.cin * g.k * g.k;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t cuv = 0; cuv < taps; ++cuv) {
    const std::size_t c = cuv / (g.k * g.k), u = (cuv / g.k) % g.k, v = cuv % g.k;
    T* dst = gwt.data() + cuv * g.cout;
    std::size_t p = 0;
    for (std::size_t i = 0; i < g.oqh; ++i) {
      for (std::size_t j = 0; j < g.oqw; ++j) {
        for (std::size_t a = 0; a < g.osh; ++a) {
          for (std::size_t b = 0; b < g.osw; ++b, ++p) {
            const Tap t = tap_at<kSupportPlane>(g, i, j, a, b, u, v);
            if (!tap_valid(g, t)) continue;
            axpy(dst, gt.data() + p * g.cout, xd[input_offset(g, c, t)], g.cout);
          }
        }
      }
    }
  }
  grads.weight = Tensor<T>(w.dims());
  const std::size_t rest = taps;
  for (std::size_t o = 0; o < g.cout; ++o) {
    for (std::size_t r = 0; r < rest; ++r) grads.weight[o * rest + r] = gwt[r * g.cout + o];
  }

  if (has_bias) {
    grads.bias = Tensor<T>({g.cout});
    for (std::size_t o = 0; o < g.cout; ++o) {
      T acc = 0;
      for (std::size_t p = 0; p < npos; ++p) acc += gd[o * npos + p];
      grads.bias[o] = acc;
    }
  }

  if (need_input) {
    const std::vector<T> wt = transpose_weight(w);
    grads.input = Tensor<T>(x.dims());
    T* gx = grads.input.data();
    if constexpr (kSupportPlane) {
      // Each output query position only touches one input query position.
#pragma omp parallel for collapse(2) schedule(static)
      for (std::size_t i = 0; i < g.oqh; ++i) {
        for (std::size_t j = 0; j < g.oqw; ++j) {
          const std::size_t pbase = (i * g.oqw + j) * splane;
          for (std::size_t c = 0; c < g.cin; ++c) {
            for (std::size_t a = 0; a < g.osh; ++a) {
              for (std::size_t b = 0; b < g.osw; ++b) {
                const T* gvec = gt.data() + (pbase + a * g.osw + b) * g.cout;
                for (std::size_t u = 0; u < g.k; ++u) {
                  for (std::size_t v = 0; v < g.k; ++v) {
                    const Tap t = tap_at<true>(g, i, j, a, b, u, v);
                    if (!tap_valid(g, t)) continue;
                    gx[input_offset(g, c, t)] += dot(gvec, wt.data() + ((c * g.k + u) * g.k + v) * g.cout, g.cout);
                  }
                }
              }
            }
          }
        }
      }
    } else {
      // Each output support position only touches one input support position.
#pragma omp parallel for collapse(2) schedule(static)
      for (std::size_t a = 0; a < g.osh; ++a) {
        for (std::size_t b = 0; b < g.osw; ++b) {
          for (std::size_t i = 0; i < g.oqh; ++i) {
            for (std::size_t j = 0; j < g.oqw; ++j) {
              const T* gvec = gt.data() + ((i * g.oqw + j) * splane + a * g.osw + b) * g.cout;
              for (std::size_t c = 0; c < g.cin; ++c) {
                for (std::size_t u = 0; u < g.k; ++u) {
                  for (std::size_t v = 0; v < g.k; ++v) {
                    const Tap t = tap_at<false>(g, i, j, a, b, u, v);
                    if (!tap_valid(g, t)) continue;
                    gx[input_offset(g, c, t)] += dot(gvec, wt.data() + ((c * g.k + u) * g.k + v) * g.cout, g.cout);
                  }
                }
              }
            }
          }
        }
      }
    }
  }
  return grads;
}

template <typename T>
void check_kernel(const Kernel4d<T>& k, const Conv4dConfig& cfg) {
  cfg.validate();
  if (k.variant != cfg.variant) throw Error(ErrorCode::kInvalidSpec, "kernel variant does not match config");
  const std::size_t n = cfg.kernel, in = cfg.in_channels, out = cfg.out_channels;
  auto expect = [](const Tensor<T>& t, const Shape& dims, const char* name) {
    if (t.dims() != dims) {
      throw Error(ErrorCode::kInvalidShape, std::string(name) + " has shape " + shape_string(t.dims()) +
                                                ", expected " + shape_string(dims));
    }
  };
  const Shape bias_dims = cfg.bias ? Shape{out} : Shape{};
  switch (cfg.variant) {
    case Conv4dVariant::kOriginal:
      expect(k.weight, {out, in, n, n, n, n}, "weight");
      expect(k.bias, bias_dims, "bias");
      break;
    case Conv4dVariant::kCenterPivot:
      expect(k.support_weight, {out, in, n, n}, "support_weight");
      expect(k.query_weight, {out, in, n, n}, "query_weight");
      expect(k.support_bias, bias_dims, "support_bias");
      expect(k.query_bias, bias_dims, "query_bias");
      break;
    case Conv4dVariant::kSeparable:
      expect(k.support_weight, {out, in, n, n}, "support_weight");
      expect(k.norm_scale, {out}, "norm_scale");
      expect(k.norm_shift, {out}, "norm_shift");
      expect(k.query_weight, {out, out, n, n}, "query_weight");
      expect(k.query_bias, bias_dims, "query_bias");
      break;
  }
}

template <typename T>
void check_input(const Tensor<T>& x, const Conv4dConfig& cfg) {
  (void)cfg.output_dims(x.dims());
}

// Separable stage strides: support dims first, then query dims.
Stride4 support_only(const Stride4& s) { return {1, 1, s.support_h, s.support_w}; }
Stride4 query_only(const Stride4& s) { return {s.query_h, s.query_w, 1, 1}; }

template <typename T>
Tensor<T> channel_affine(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift) {
  Tensor<T> out = x;
  const std::size_t per = x.size() / x.dim(0);
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    T* p = out.data() + c * per;
    for (std::size_t i = 0; i < per; ++i) p[i] = scale[c] * p[i] + shift[c];
  }
  return out;
}

}  // namespace

std::string_view to_string(Conv4dVariant variant) {
  switch (variant) {
    case Conv4dVariant::kOriginal: return "original";
    case Conv4dVariant::kCenterPivot: return "center-pivot";
    case Conv4dVariant::kSeparable: return "separable";
  }
  return "unknown";
}

Conv4dVariant parse_variant(std::string_view name) {
  if (name == "original") return Conv4dVariant::kOriginal;
  if (name == "center-pivot" || name == "cp") return Conv4dVariant::kCenterPivot;
  if (name == "separable") return Conv4dVariant::kSeparable;
  throw Error(ErrorCode::kInvalidSpec, "unknown kernel variant '" + std::string(name) + "'");
}

void Conv4dConfig::validate() const {
  if (in_channels == 0 || out_channels == 0) throw Error(ErrorCode::kInvalidSpec, "conv4d channels must be >= 1");
  if (kernel == 0 || kernel % 2 == 0) throw Error(ErrorCode::kInvalidSpec, "conv4d kernel size must be odd");
  check_stride(stride);
}

Shape Conv4dConfig::output_dims(const Shape& input) const {
  validate();
  if (input.size() != 5) throw Error(ErrorCode::kInvalidShape, "conv4d input must be rank 5, got " + shape_string(input));
  if (input[0] != in_channels) {
    throw Error(ErrorCode::kInvalidShape, "conv4d expects " + std::to_string(in_channels) + " input channels, got " +
                                              shape_string(input));
  }
  return {out_channels, strided_extent(input[1], kernel, stride.query_h), strided_extent(input[2], kernel, stride.query_w),
          strided_extent(input[3], kernel, stride.support_h), strided_extent(input[4], kernel, stride.support_w)};
}

template <typename T>
Kernel4d<T> Kernel4d<T>::zeros(const Conv4dConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.kernel, in = cfg.in_channels, out = cfg.out_channels;
  Kernel4d<T> k;
  k.variant = cfg.variant;
  switch (cfg.variant) {
    case Conv4dVariant::kOriginal:
      k.weight = Tensor<T>({out, in, n, n, n, n});
      if (cfg.bias) k.bias = Tensor<T>({out});
      break;
    case Conv4dVariant::kCenterPivot:
      k.support_weight = Tensor<T>({out, in, n, n});
      k.query_weight = Tensor<T>({out, in, n, n});
      if (cfg.bias) {
        k.support_bias = Tensor<T>({out});
        k.query_bias = Tensor<T>({out});
      }
      break;
    case Conv4dVariant::kSeparable:
      k.support_weight = Tensor<T>({out, in, n, n});
      k.norm_scale = Tensor<T>({out}, T{1});
      k.norm_shift = Tensor<T>({out});
      k.query_weight = Tensor<T>({out, out, n, n});
      if (cfg.bias) k.query_bias = Tensor<T>({out});
      break;
  }
  return k;
}

template <typename T>
Tensor<T> support_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Stride4 stride) {
  return planar_forward<T, true>(x, w, bias, stride);
}

template <typename T>
Tensor<T> query_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Stride4 stride) {
  return planar_forward<T, false>(x, w, bias, stride);
}

template <typename T>
PlanarGrads<T> support_conv_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w,
                                     bool has_bias, Stride4 stride, bool need_input) {
  return planar_backward<T, true>(grad_out, x, w, has_bias, stride, need_input);
}

template <typename T>
PlanarGrads<T> query_conv_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w,
                                   bool has_bias, Stride4 stride, bool need_input) {
  return planar_backward<T, false>(grad_out, x, w, has_bias, stride, need_input);
}

template <typename T>
Tensor<T> conv4d_original(const Tensor<T>& x, const Kernel4d<T>& k, const Conv4dConfig& cfg) {
  check_kernel(k, cfg);
  const Shape od = cfg.output_dims(x.dims());
  Tensor<T> out(od);
  const std::size_t cin = x.dim(0), hq = x.dim(1), wq = x.dim(2), hs = x.dim(3), ws = x.dim(4);
  const std::size_t n = cfg.kernel;
  const Index pad = static_cast<Index>(cfg.padding());
  const Stride4 st = cfg.stride;

#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t o = 0; o < od[0]; ++o) {
    for (std::size_t i = 0; i < od[1]; ++i) {
      for (std::size_t j = 0; j < od[2]; ++j) {
        for (std::size_t a = 0; a < od[3]; ++a) {
          for (std::size_t b = 0; b < od[4]; ++b) {
            T acc = k.bias.empty() ? T{0} : k.bias[o];
            for (std::size_t c = 0; c < cin; ++c) {
              for (std::size_t u1 = 0; u1 < n; ++u1) {
                const Index p1 = static_cast<Index>(i * st.query_h + u1) - pad;
                if (!in_range(p1, hq)) continue;
                for (std::size_t v1 = 0; v1 < n; ++v1) {
                  const Index p2 = static_cast<Index>(j * st.query_w + v1) - pad;
                  if (!in_range(p2, wq)) continue;
                  for (std::size_t u2 = 0; u2 < n; ++u2) {
                    const Index p3 = static_cast<Index>(a * st.support_h + u2) - pad;
                    if (!in_range(p3, hs)) continue;
                    for (std::size_t v2 = 0; v2 < n; ++v2) {
                      const Index p4 = static_cast<Index>(b * st.support_w + v2) - pad;
                      if (!in_range(p4, ws)) continue;
                      acc += x(c, p1, p2, p3, p4) * k.weight(o, c, u1, v1, u2, v2);
                    }
                  }
                }
              }
            }
            out(o, i, j, a, b) = acc;
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv4d_center_pivot(const Tensor<T>& x, const Kernel4d<T>& k, const Conv4dConfig& cfg) {
  check_kernel(k, cfg);
  check_input(x, cfg);
  Tensor<T> out = support_conv(x, k.support_weight, k.support_bias, cfg.stride);
  accumulate(out, query_conv(x, k.query_weight, k.query_bias, cfg.stride));
  return out;
}

template <typename T>
Tensor<T> conv4d_separable(const Tensor<T>& x, const Kernel4d<T>& k, const Conv4dConfig& cfg) {
  check_kernel(k, cfg);
  check_input(x, cfg);
  const Tensor<T> stage1 = support_conv(x, k.support_weight, Tensor<T>{}, support_only(cfg.stride));
  const Tensor<T> normed = channel_affine(stage1, k.norm_scale, k.norm_shift);
  return query_conv(normed, k.query_weight, k.query_bias, query_only(cfg.stride));
}

template <typename T>
Tensor<T> conv4d(const Tensor<T>& x, const Kernel4d<T>& k, const Conv4dConfig& cfg) {
  switch (cfg.variant) {
    case Conv4dVariant::kOriginal: return conv4d_original(x, k, cfg);
    case Conv4dVariant::kCenterPivot: return conv4d_center_pivot(x, k, cfg);
    case Conv4dVariant::kSeparable: return conv4d_separable(x, k, cfg);
  }
  throw Error(ErrorCode::kInvalidSpec, "unknown variant");
}

template <typename T>
Conv4dGrads<T> conv4d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Kernel4d<T>& k,
                               const Conv4dConfig& cfg, bool need_input) {
  check_kernel(k, cfg);
  const Shape od = cfg.output_dims(x.dims());
  if (grad_out.dims() != od) {
    throw Error(ErrorCode::kInvalidShape, "conv4d_backward: gradient " + shape_string(grad_out.dims()) +
                                              " vs output " + shape_string(od));
  }
  Conv4dGrads<T> grads;
  grads.kernel.variant = cfg.variant;

  switch (cfg.variant) {
    case Conv4dVariant::kCenterPivot: {
      auto gs = support_conv_backward(grad_out, x, k.support_weight, cfg.bias, cfg.stride, need_input);
      auto gq = query_conv_backward(grad_out, x, k.query_weight, cfg.bias, cfg.stride, need_input);
      grads.kernel.support_weight = std::move(gs.weight);
      grads.kernel.support_bias = std::move(gs.bias);
      grads.kernel.query_weight = std::move(gq.weight);
      grads.kernel.query_bias = std::move(gq.bias);
      if (need_input) {
        grads.input = std::move(gs.input);
        accumulate(grads.input, gq.input);
      }
      break;
    }
    case Conv4dVariant::kSeparable: {
      const Tensor<T> stage1 = support_conv(x, k.support_weight, Tensor<T>{}, support_only(cfg.stride));
      const Tensor<T> normed = channel_affine(stage1, k.norm_scale, k.norm_shift);
      auto gq = query_conv_backward(grad_out, normed, k.query_weight, cfg.bias, query_only(cfg.stride), true);
      grads.kernel.query_weight = std::move(gq.weight);
      grads.kernel.query_bias = std::move(gq.bias);
      const std::size_t per = stage1.size() / stage1.dim(0);
      grads.kernel.norm_scale = Tensor<T>({cfg.out_channels});
      grads.kernel.norm_shift = Tensor<T>({cfg.out_channels});
      Tensor<T> g_stage1 = gq.input;
      for (std::size_t c = 0; c < cfg.out_channels; ++c) {
        T gs = 0, gb = 0;
        for (std::size_t i = 0; i < per; ++i) {
          const T g = gq.input[c * per + i];
          gs += g * stage1[c * per + i];
          gb += g;
          g_stage1[c * per + i] = g * k.norm_scale[c];
        }
        grads.kernel.norm_scale[c] = gs;
        grads.kernel.norm_shift[c] = gb;
      }
      auto g1 = support_conv_backward(g_stage1, x, k.support_weight, false, support_only(cfg.stride), need_input);
      grads.kernel.support_weight = std::move(g1.weight);
      if (need_input) grads.input = std::move(g1.input);
      break;
    }
    case Conv4dVariant::kOriginal: {
      const std::size_t cin = x.dim(0), hq = x.dim(1), wq = x.dim(2), hs = x.dim(3), ws = x.dim(4);
      const std::size_t n = cfg.kernel;
      const Index pad = static_cast<Index>(cfg.padding());
      const Stride4 st = cfg.stride;
      grads.kernel.weight = Tensor<T>(k.weight.dims());
      if (need_input) grads.input = Tensor<T>(x.dims());
      // Visits every (output, tap) pair; body(o, c, tap index, input offset).
      auto sweep = [&](std::size_t o, std::size_t c, auto&& body) {
        for (std::size_t i = 0; i < od[1]; ++i)
          for (std::size_t j = 0; j < od[2]; ++j)
            for (std::size_t a = 0; a < od[3]; ++a)
              for (std::size_t b = 0; b < od[4]; ++b) {
                const T g = grad_out(o, i, j, a, b);
                for (std::size_t u1 = 0; u1 < n; ++u1) {
                  const Index p1 = static_cast<Index>(i * st.query_h + u1) - pad;
                  if (!in_range(p1, hq)) continue;
                  for (std::size_t v1 = 0; v1 < n; ++v1) {
                    const Index p2 = static_cast<Index>(j * st.query_w + v1) - pad;
                    if (!in_range(p2, wq)) continue;
                    for (std::size_t u2 = 0; u2 < n; ++u2) {
                      const Index p3 = static_cast<Index>(a * st.support_h + u2) - pad;
                      if (!in_range(p3, hs)) continue;
                      for (std::size_t v2 = 0; v2 < n; ++v2) {
                        const Index p4 = static_cast<Index>(b * st.support_w + v2) - pad;
                        if (!in_range(p4, ws)) continue;
                        const std::size_t tap = ((u1 * n + v1) * n + u2) * n + v2;
                        const std::size_t off = (((c * hq + p1) * wq + p2) * hs + p3) * ws + p4;
                        body(g, tap, off);
                      }
                    }
                  }
                }
              }
      };
      const std::size_t taps = n * n * n * n;
#pragma omp parallel for collapse(2) schedule(static)
      for (std::size_t o = 0; o < cfg.out_channels; ++o) {
        for (std::size_t c = 0; c < cin; ++c) {
          T* gw = grads.kernel.weight.data() + (o * cin + c) * taps;
          sweep(o, c, [&](T g, std::size_t tap, std::size_t off) { gw[tap] += g * x[off]; });
        }
      }
      if (need_input) {
#pragma omp parallel for schedule(static)
        for (std::size_t c = 0; c < cin; ++c) {
          for (std::size_t o = 0; o < cfg.out_channels; ++o) {
            const T* w = k.weight.data() + (o * cin + c) * taps;
            sweep(o, c, [&](T g, std::size_t tap, std::size_t off) { grads.input[off] += g * w[tap]; });
          }
        }
      }
      if (cfg.bias) {
        grads.kernel.bias = Tensor<T>({cfg.out_channels});
        const std::size_t per = grad_out.size() / cfg.out_channels;
        for (std::size_t o = 0; o < cfg.out_channels; ++o) {
          T acc = 0;
          for (std::size_t i = 0; i < per; ++i) acc += grad_out[o * per + i];
          grads.kernel.bias[o] = acc;
        }
      }
      break;
    }
  }
  return grads;
}

template <typename T>
Kernel4d<T> center_pivot_as_dense(const Kernel4d<T>& cp, const Conv4dConfig& cfg) {
  check_kernel(cp, cfg);
  Conv4dConfig dense_cfg = cfg;
  dense_cfg.variant = Conv4dVariant::kOriginal;
  Kernel4d<T> dense = Kernel4d<T>::zeros(dense_cfg);
  const std::size_t n = cfg.kernel, mid = n / 2;
  for (std::size_t o = 0; o < cfg.out_channels; ++o) {
    for (std::size_t c = 0; c < cfg.in_channels; ++c) {
      for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v) {
          dense.weight(o, c, mid, mid, u, v) += cp.support_weight(o, c, u, v);
          dense.weight(o, c, u, v, mid, mid) += cp.query_weight(o, c, u, v);
        }
      }
    }
    if (cfg.bias) dense.bias[o] = cp.support_bias[o] + cp.query_bias[o];
  }
  return dense;
}

#define HSNET_INSTANTIATE(T)                                                                                    \
  template struct Kernel4d<T>;                                                                                  \
  template Tensor<T> support_conv(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Stride4);               \
  template Tensor<T> query_conv(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Stride4);                 \
  template PlanarGrads<T> support_conv_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool,     \
                                                Stride4, bool);                                                 \
  template PlanarGrads<T> query_conv_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool,       \
                                              Stride4, bool);                                                   \
  template Tensor<T> conv4d_original(const Tensor<T>&, const Kernel4d<T>&, const Conv4dConfig&);                \
  template Tensor<T> conv4d_center_pivot(const Tensor<T>&, const Kernel4d<T>&, const Conv4dConfig&);            \
  template Tensor<T> conv4d_separable(const Tensor<T>&, const Kernel4d<T>&, const Conv4dConfig&);               \
  template Tensor<T> conv4d(const Tensor<T>&, const Kernel4d<T>&, const Conv4dConfig&);                         \
  template Conv4dGrads<T> conv4d_backward(const Tensor<T>&, const Tensor<T>&, const Kernel4d<T>&,               \
                                          const Conv4dConfig&, bool);                                           \
  template Kernel4d<T> center_pivot_as_dense(const Kernel4d<T>&, const Conv4dConfig&);

HSNET_INSTANTIATE(float)
HSNET_INSTANTIATE(double)
#undef HSNET_INSTANTIATE

}  // namespace hsnet
