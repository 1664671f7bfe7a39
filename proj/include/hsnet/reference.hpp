// SPDX-License-Identifier: Apache-2.0
#pragma once

// Serial, loop-for-loop implementations kept as test oracles for the
// OpenMP kernels. They follow the defining formulas with no reordering.

#include "hsnet/conv4d.hpp"
#include "hsnet/tensor.hpp"

namespace hsnet::reference {

template <typename T>
Tensor<T> support_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Stride4 stride);

template <typename T>
Tensor<T> query_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Stride4 stride);

// Both 2D sums of the center-pivot decomposition evaluated in one loop nest.
template <typename T>
Tensor<T> conv4d_center_pivot(const Tensor<T>& x, const Kernel4d<T>& k, const Conv4dConfig& cfg);

// Pairwise cosine, one position pair at a time.
template <typename T>
Tensor<T> correlation_4d(const Tensor<T>& query, const Tensor<T>& support);

// (Cin, H, W) -> (Cout, H, W), stride 1, zero padding k/2.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

}  // namespace hsnet::reference
