// SPDX-License-Identifier: Apache-2.0
#include "hsnet/layers.hpp"

#include <cmath>
#include <vector>

namespace hsnet {
namespace {

template <typename T>
Tensor<T> as_planar(const Tensor<T>& x) {
  require_rank(x, 3, "conv2d input");
  return x.reshaped({x.dim(0), x.dim(1), x.dim(2), 1, 1});
}

template <typename T>
void check_group_norm(const Tensor<T>& x, const Tensor<T>& gamma, std::size_t groups) {
  if (x.rank() < 2) throw Error(ErrorCode::kInvalidShape, "group_norm needs rank >= 2");
  if (groups == 0 || x.dim(0) % groups != 0) {
    throw Error(ErrorCode::kInvalidSpec, std::to_string(x.dim(0)) + " channels do not split into " +
                                             std::to_string(groups) + " groups");
  }
  if (gamma.dims() != Shape{x.dim(0)}) throw Error(ErrorCode::kInvalidShape, "group_norm affine shape");
}

struct GroupStats {
  std::vector<double> mean, inv_std;
};

template <typename T>
GroupStats group_stats(const Tensor<T>& x, std::size_t groups, double eps) {
  const std::size_t count = x.size() / groups;
  GroupStats s{std::vector<double>(groups), std::vector<double>(groups)};
#pragma omp parallel for schedule(static)
  for (std::size_t g = 0; g < groups; ++g) {
    const T* p = x.data() + g * count;
    double sum = 0;
    for (std::size_t i = 0; i < count; ++i) sum += p[i];
    const double mean = sum / static_cast<double>(count);
    double var = 0;
    for (std::size_t i = 0; i < count; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<double>(count);
    s.mean[g] = mean;
    s.inv_std[g] = 1.0 / std::sqrt(var + eps);
  }
  return s;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  const Tensor<T> out = query_conv(as_planar(x), w, bias, Stride4{});
  return out.reshaped({out.dim(0), out.dim(1), out.dim(2)});
}

template <typename T>
PlanarGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w, bool has_bias,
                               bool need_input) {
  require_rank(grad_out, 3, "conv2d gradient");
  auto g = query_conv_backward(as_planar(grad_out), as_planar(x), w, has_bias, Stride4{}, need_input);
  if (need_input) g.input = g.input.reshaped(x.dims());
  return g;
}

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, std::size_t groups,
                     double eps) {
  check_group_norm(x, gamma, groups);
  const GroupStats s = group_stats(x, groups, eps);
  const std::size_t per_channel = x.size() / x.dim(0), channels_per_group = x.dim(0) / groups;
  Tensor<T> out(x.dims());
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    const std::size_t g = c / channels_per_group;
    const T* p = x.data() + c * per_channel;
    T* o = out.data() + c * per_channel;
    for (std::size_t i = 0; i < per_channel; ++i) {
      o[i] = static_cast<T>(gamma[c] * (p[i] - s.mean[g]) * s.inv_std[g] + beta[c]);
    }
  }
  return out;
}

template <typename T>
GroupNormGrads<T> group_norm_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& gamma,
                                      std::size_t groups, double eps) {
  check_group_norm(x, gamma, groups);
  require_same_shape(grad_out, x, "group_norm_backward");
  const GroupStats s = group_stats(x, groups, eps);
  const std::size_t channels = x.dim(0), per_channel = x.size() / channels;
  const std::size_t channels_per_group = channels / groups;
  const double count = static_cast<double>(per_channel * channels_per_group);
  GroupNormGrads<T> grads{Tensor<T>(x.dims()), Tensor<T>({channels}), Tensor<T>({channels})};

#pragma omp parallel for schedule(static)
  for (std::size_t g = 0; g < groups; ++g) {
    // dxhat = dy * gamma; dx = inv_std / N * (N dxhat - sum dxhat - xhat sum(dxhat xhat))
    double sum_d = 0, sum_dx = 0;
    for (std::size_t c = g * channels_per_group; c < (g + 1) * channels_per_group; ++c) {
      const T* p = x.data() + c * per_channel;
      const T* dy = grad_out.data() + c * per_channel;
      double dgamma = 0, dbeta = 0;
      for (std::size_t i = 0; i < per_channel; ++i) {
        const double xhat = (p[i] - s.mean[g]) * s.inv_std[g];
        const double dxhat = static_cast<double>(dy[i]) * gamma[c];
        sum_d += dxhat;
        sum_dx += dxhat * xhat;
        dgamma += static_cast<double>(dy[i]) * xhat;
        dbeta += dy[i];
      }
      grads.gamma[c] = static_cast<T>(dgamma);
      grads.beta[c] = static_cast<T>(dbeta);
    }
    for (std::size_t c = g * channels_per_group; c < (g + 1) * channels_per_group; ++c) {
      const T* p = x.data() + c * per_channel;
      const T* dy = grad_out.data() + c * per_channel;
      T* dx = grads.input.data() + c * per_channel;
      for (std::size_t i = 0; i < per_channel; ++i) {
        const double xhat = (p[i] - s.mean[g]) * s.inv_std[g];
        const double dxhat = static_cast<double>(dy[i]) * gamma[c];
        dx[i] = static_cast<T>(s.inv_std[g] / count * (count * dxhat - sum_d - xhat * sum_dx));
      }
    }
  }
  return grads;
}

#define HSNET_INSTANTIATE(T)                                                                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template PlanarGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool, bool);  \
  template Tensor<T> group_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, double);   \
  template GroupNormGrads<T> group_norm_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                                 std::size_t, double);

HSNET_INSTANTIATE(float)
HSNET_INSTANTIATE(double)
#undef HSNET_INSTANTIATE

}  // namespace hsnet
