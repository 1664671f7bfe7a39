// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable wrappers that record library kernels on a Tape together
// with their vector-Jacobian products.

#include <cstddef>
#include <optional>
#include <vector>

#include "hsnet/conv4d.hpp"
#include "hsnet/tape.hpp"

namespace hsnet::ad {

// Ground-truth value excluded from the loss and from metrics.
inline constexpr double kIgnoreLabel = 255.0;

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b);

template <typename T>
Var scale(Tape<T>& tape, Var a, T factor);

// Sum of all elements, shape (1).
template <typename T>
Var sum(Tape<T>& tape, Var a);

template <typename T>
Var relu(Tape<T>& tape, Var a);

template <typename T>
Var bilinear_resize(Tape<T>& tape, Var a, std::size_t out_h, std::size_t out_w);

template <typename T>
Var avg_pool_support_dims(Tape<T>& tape, Var a);

template <typename T>
Var softmax_channel(Tape<T>& tape, Var logits);

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, std::optional<Var> bias);

template <typename T>
Var group_norm(Tape<T>& tape, Var x, Var gamma, Var beta, std::size_t groups);

template <typename T>
Var correlation_4d(Tape<T>& tape, Var query, Var support);

// Tape handles of a Kernel4d's populated members.
struct Kernel4dVars {
  std::optional<Var> weight, bias;
  std::optional<Var> support_weight, support_bias;
  std::optional<Var> query_weight, query_bias;
  std::optional<Var> norm_scale, norm_shift;
};

template <typename T>
Var conv4d(Tape<T>& tape, Var x, const Kernel4dVars& kernel, const Conv4dConfig& cfg);

// Mean over non-ignored pixels of -log softmax(logits)[label]; logits are
// (C, H, W), labels (H, W) with values in [0, C) or kIgnoreLabel. Computed
// with log-sum-exp. Shape (1).
template <typename T>
Var cross_entropy(Tape<T>& tape, Var logits, const Tensor<T>& labels);

}  // namespace hsnet::ad
