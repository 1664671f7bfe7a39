// SPDX-License-Identifier: Apache-2.0
#include "hsnet/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hsnet/tensor_ops.hpp"

namespace hsnet {
namespace {

// Unit-normalizes each of the N = H*W feature vectors of a (C, H, W) tensor;
// vectors below the zero-norm threshold become zero. Returns the norms.
template <typename T>
std::vector<T> normalize_columns(const Tensor<T>& f, std::vector<T>& unit) {
  const std::size_t channels = f.dim(0), n = f.dim(1) * f.dim(2);
  std::vector<double> sq(n, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* row = f.data() + c * n;
    for (std::size_t x = 0; x < n; ++x) sq[x] += static_cast<double>(row[x]) * row[x];
  }
  std::vector<T> norms(n), inv(n);
  for (std::size_t x = 0; x < n; ++x) {
    const double norm = std::sqrt(sq[x]);
    norms[x] = static_cast<T>(norm);
    inv[x] = norm < kZeroNormThreshold ? T{0} : static_cast<T>(1.0 / norm);
  }
  unit.resize(f.size());
  for (std::size_t c = 0; c < channels; ++c) {
    const T* row = f.data() + c * n;
    T* dst = unit.data() + c * n;
    for (std::size_t x = 0; x < n; ++x) dst[x] = row[x] * inv[x];
  }
  return norms;
}

template <typename T>
void check_pair(const Tensor<T>& q, const Tensor<T>& s) {
  require_rank(q, 3, "correlation_4d query");
  require_rank(s, 3, "correlation_4d support");
  if (q.dims() != s.dims()) {
    throw Error(ErrorCode::kInvalidShape,
                "correlation_4d: query " + shape_string(q.dims()) + " vs support " + shape_string(s.dims()));
  }
}

// Raw cosine matrix (N x N) of unit vectors, row-major over query positions.
template <typename T>
std::vector<T> cosine_matrix(const std::vector<T>& qn, const std::vector<T>& sn, std::size_t channels,
                             std::size_t n) {
  std::vector<T> out(n * n, T{0});
#pragma omp parallel for schedule(static)
  for (std::size_t xq = 0; xq < n; ++xq) {
    T* row = out.data() + xq * n;
    for (std::size_t c = 0; c < channels; ++c) {
      const T qv = qn[c * n + xq];
      if (qv == 0) continue;
      const T* srow = sn.data() + c * n;
      for (std::size_t xs = 0; xs < n; ++xs) row[xs] += qv * srow[xs];
    }
  }
  return out;
}

}  // namespace

template <typename T>
void FeatureSet<T>::validate() const {
  if (features.size() != layer_ids.size()) {
    throw Error(ErrorCode::kInvalidSpec, "feature count does not match layer id count");
  }
  for (std::size_t i = 1; i < layer_ids.size(); ++i) {
    if (layer_ids[i] <= layer_ids[i - 1]) throw Error(ErrorCode::kInvalidSpec, "layer ids must be strictly increasing");
  }
  std::size_t total = 0;
  for (auto g : group_sizes) {
    if (g == 0) throw Error(ErrorCode::kInvalidSpec, "pyramid group of size 0");
    total += g;
  }
  if (total != features.size()) {
    throw Error(ErrorCode::kInvalidSpec, "pyramid groups cover " + std::to_string(total) + " of " +
                                             std::to_string(features.size()) + " layers");
  }
  std::size_t layer = 0;
  for (auto g : group_sizes) {
    for (std::size_t i = 0; i < g; ++i, ++layer) {
      require_rank(features[layer], 3, "feature map");
      const auto& first = features[layer - i];
      if (features[layer].dim(1) != first.dim(1) || features[layer].dim(2) != first.dim(2)) {
        throw Error(ErrorCode::kInvalidSpec, "layer " + std::to_string(layer_ids[layer]) +
                                                 " spatial size differs within its pyramid group");
      }
    }
  }
}

template <typename T>
std::size_t FeatureSet<T>::group_begin(std::size_t level) const {
  std::size_t begin = 0;
  for (std::size_t p = 0; p < level; ++p) begin += group_sizes.at(p);
  return begin;
}

template <typename T>
FeatureSet<T> mask_support_features(const FeatureSet<T>& support, const Tensor<T>& mask) {
  support.validate();
  Tensor<T> m;
  if (mask.rank() == 2) {
    m = mask.reshaped({1, mask.dim(0), mask.dim(1)});
  } else if (mask.rank() == 3 && mask.dim(0) == 1) {
    m = mask;
  } else {
    throw Error(ErrorCode::kInvalidShape, "support mask must be (H, W), got " + shape_string(mask.dims()));
  }
  for (T v : m.values()) {
    if (!(v >= 0 && v <= 1)) throw Error(ErrorCode::kInvalidInput, "support mask value outside [0, 1]");
  }
  FeatureSet<T> out = support;
  for (auto& f : out.features) {
    const std::size_t h = f.dim(1), w = f.dim(2), plane = h * w;
    const Tensor<T> zeta = bilinear_resize(m, h, w);
    for (std::size_t c = 0; c < f.dim(0); ++c) {
      T* p = f.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] *= zeta[i];
    }
  }
  return out;
}

template <typename T>
Tensor<T> correlation_4d(const Tensor<T>& query, const Tensor<T>& support) {
  check_pair(query, support);
  const std::size_t channels = query.dim(0), h = query.dim(1), w = query.dim(2), n = h * w;
  std::vector<T> qn, sn;
  normalize_columns(query, qn);
  normalize_columns(support, sn);
  std::vector<T> cos = cosine_matrix(qn, sn, channels, n);
  // Rounding can push the cosine of parallel vectors just above 1.
  for (auto& v : cos) v = std::clamp(v, T{0}, T{1});
  return Tensor<T>({h, w, h, w}, std::move(cos));
}

template <typename T>
CorrelationGrads<T> correlation_4d_backward(const Tensor<T>& grad_out, const Tensor<T>& query,
                                            const Tensor<T>& support) {
  check_pair(query, support);
  const std::size_t channels = query.dim(0), h = query.dim(1), w = query.dim(2), n = h * w;
  if (grad_out.dims() != Shape{h, w, h, w}) {
    throw Error(ErrorCode::kInvalidShape, "correlation_4d_backward gradient " + shape_string(grad_out.dims()));
  }
  std::vector<T> qn, sn;
  const std::vector<T> qnorm = normalize_columns(query, qn);
  const std::vector<T> snorm = normalize_columns(support, sn);
  std::vector<T> gm = cosine_matrix(qn, sn, channels, n);
  for (std::size_t i = 0; i < gm.size(); ++i) gm[i] = gm[i] > 0 ? grad_out[i] : T{0};

  // Gradients w.r.t. the unit vectors.
  std::vector<T> dq(channels * n, T{0}), ds(channels * n, T{0});
#pragma omp parallel for schedule(static)
  for (std::size_t xq = 0; xq < n; ++xq) {
    const T* grow = gm.data() + xq * n;
    for (std::size_t c = 0; c < channels; ++c) {
      const T* srow = sn.data() + c * n;
      T acc = 0;
      for (std::size_t xs = 0; xs < n; ++xs) acc += grow[xs] * srow[xs];
      dq[c * n + xq] = acc;
    }
  }
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    T* drow = ds.data() + c * n;
    for (std::size_t xq = 0; xq < n; ++xq) {
      const T qv = qn[c * n + xq];
      if (qv == 0) continue;
      const T* grow = gm.data() + xq * n;
      for (std::size_t xs = 0; xs < n; ++xs) drow[xs] += qv * grow[xs];
    }
  }

  // Through the normalization: d f = (d u - u (u . d u)) / |f|.
  auto project = [&](const std::vector<T>& unit, const std::vector<T>& du, const std::vector<T>& norms) {
    Tensor<T> g({channels, h, w});
    for (std::size_t x = 0; x < n; ++x) {
      if (norms[x] < kZeroNormThreshold) continue;
      T along = 0;
      for (std::size_t c = 0; c < channels; ++c) along += unit[c * n + x] * du[c * n + x];
      for (std::size_t c = 0; c < channels; ++c) {
        g[c * n + x] = (du[c * n + x] - unit[c * n + x] * along) / norms[x];
      }
    }
    return g;
  };
  return {project(qn, dq, qnorm), project(sn, ds, snorm)};
}

template <typename T>
std::vector<Hypercorrelation<T>> build_hypercorrelation_pyramid(const FeatureSet<T>& query,
                                                                const FeatureSet<T>& masked_support) {
  query.validate();
  masked_support.validate();
  if (query.group_sizes != masked_support.group_sizes) {
    throw Error(ErrorCode::kInvalidSpec, "query and support pyramid specs differ");
  }
  std::vector<Hypercorrelation<T>> pyramid;
  std::size_t layer = 0;
  for (std::size_t p = 0; p < query.levels(); ++p) {
    const std::size_t count = query.group_sizes[p];
    const std::size_t h = query.features[layer].dim(1), w = query.features[layer].dim(2);
    Tensor<T> stacked({count, h, w, h, w});
    const std::size_t volume = h * w * h * w;
    for (std::size_t i = 0; i < count; ++i, ++layer) {
      const Tensor<T> corr = correlation_4d(query.features[layer], masked_support.features[layer]);
      std::copy(corr.values().begin(), corr.values().end(), stacked.data() + i * volume);
    }
    pyramid.push_back({p + 1, std::move(stacked)});
  }
  return pyramid;
}

#define HSNET_INSTANTIATE(T)                                                                                \
  template struct FeatureSet<T>;                                                                            \
  template FeatureSet<T> mask_support_features(const FeatureSet<T>&, const Tensor<T>&);                     \
  template Tensor<T> correlation_4d(const Tensor<T>&, const Tensor<T>&);                                    \
  template CorrelationGrads<T> correlation_4d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template std::vector<Hypercorrelation<T>> build_hypercorrelation_pyramid(const FeatureSet<T>&,            \
                                                                           const FeatureSet<T>&);

HSNET_INSTANTIATE(float)
HSNET_INSTANTIATE(double)
#undef HSNET_INSTANTIATE

}  // namespace hsnet
