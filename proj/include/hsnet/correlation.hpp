// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "hsnet/tensor.hpp"

namespace hsnet {

// Feature vectors with a norm below this are treated as zero and correlate to 0.
inline constexpr double kZeroNormThreshold = 1e-8;

// Ordered backbone features of one image. Layers are grouped consecutively
// into pyramid levels: the first group_sizes[0] layers form level 1 (the
// finest), and so on. All layers of a group share one spatial size.
template <typename T>
struct FeatureSet {
  std::vector<std::size_t> layer_ids;  // strictly increasing
  std::vector<Tensor<T>> features;     // (C_l, H_l, W_l)
  std::vector<std::size_t> group_sizes;

  void validate() const;
  std::size_t levels() const { return group_sizes.size(); }
  // Index of the first layer of a level.
  std::size_t group_begin(std::size_t level) const;
};

// Zeroes support activations outside the mask: each layer is multiplied by
// the mask bilinearly resized to its (H_l, W_l) and broadcast over channels.
// Resized mask values are used as soft weights. Accepts a (H, W) or (1, H, W)
// mask with values in [0, 1].
template <typename T>
FeatureSet<T> mask_support_features(const FeatureSet<T>& support, const Tensor<T>& mask);

// (C, H, W) x (C, H, W) -> (H, W, H, W): ReLU-clamped cosine similarity of
// every query/support position pair.
template <typename T>
Tensor<T> correlation_4d(const Tensor<T>& query, const Tensor<T>& support);

template <typename T>
struct CorrelationGrads {
  Tensor<T> query, support;
};

template <typename T>
CorrelationGrads<T> correlation_4d_backward(const Tensor<T>& grad_out, const Tensor<T>& query,
                                            const Tensor<T>& support);

template <typename T>
struct Hypercorrelation {
  std::size_t level = 0;  // 1-based pyramid level
  Tensor<T> tensor;       // (|L_p|, H_p, W_p, H_p, W_p)
};

// One channel-stacked correlation volume per pyramid level, layers in
// increasing order within each level.
template <typename T>
std::vector<Hypercorrelation<T>> build_hypercorrelation_pyramid(const FeatureSet<T>& query,
                                                                const FeatureSet<T>& masked_support);

}  // namespace hsnet
