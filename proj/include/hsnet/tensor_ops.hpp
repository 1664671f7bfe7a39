// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "hsnet/tensor.hpp"

namespace hsnet {

// Bilinear resampling of dims 1 and 2 of a (C, H, W, ...) tensor with
// half-pixel centers (no corner alignment). Trailing dims are carried along,
// so the same routine upsamples the query dims of a (C, Hq, Wq, Hs, Ws)
// correlation tensor. Resizing to the source size is the identity.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& src, std::size_t out_h, std::size_t out_w);

// Adjoint of bilinear_resize: maps a gradient of the resized tensor back onto
// the source grid of extent (in_h, in_w).
template <typename T>
Tensor<T> bilinear_resize_backward(const Tensor<T>& grad_out, std::size_t in_h, std::size_t in_w);

// (C, Hq, Wq, Hs, Ws) -> (C, Hq, Wq): mean over the two support dims.
template <typename T>
Tensor<T> avg_pool_support_dims(const Tensor<T>& t);

template <typename T>
Tensor<T> avg_pool_support_dims_backward(const Tensor<T>& grad_out, std::size_t hs, std::size_t ws);

// Per-pixel softmax over the leading channel axis of a (C, H, W) tensor.
template <typename T>
Tensor<T> softmax_channel(const Tensor<T>& logits);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// grad * [x > 0]
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// a += scale * b
template <typename T>
void accumulate(Tensor<T>& a, const Tensor<T>& b, T scale = T{1});

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace hsnet
