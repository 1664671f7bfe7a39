// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "hsnet/conv4d.hpp"
#include "hsnet/tensor.hpp"

namespace hsnet {

// (Cin, H, W) -> (Cout, H, W), stride 1, zero padding k/2. Runs on the
// query-plane kernel with 1x1 trailing dims.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

template <typename T>
PlanarGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w, bool has_bias,
                               bool need_input);

inline constexpr double kGroupNormEps = 1e-5;

// Normalizes each group of C/groups channels over all of its trailing
// elements (biased variance), then applies a per-channel affine.
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, std::size_t groups,
                     double eps = kGroupNormEps);

template <typename T>
struct GroupNormGrads {
  Tensor<T> input, gamma, beta;
};

template <typename T>
GroupNormGrads<T> group_norm_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& gamma,
                                      std::size_t groups, double eps = kGroupNormEps);

}  // namespace hsnet
