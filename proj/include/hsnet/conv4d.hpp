// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "hsnet/tensor.hpp"

namespace hsnet {

enum class Conv4dVariant { kOriginal, kCenterPivot, kSeparable };

std::string_view to_string(Conv4dVariant variant);
Conv4dVariant parse_variant(std::string_view name);  // original | center-pivot | separable

// Strides of the two query dims followed by the two support dims.
struct Stride4 {
  std::size_t query_h = 1, query_w = 1, support_h = 1, support_w = 1;
  bool operator==(const Stride4&) const = default;
};

struct Conv4dConfig {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;  // odd; same extent on all four dims
  Stride4 stride;
  Conv4dVariant variant = Conv4dVariant::kCenterPivot;
  bool bias = true;

  std::size_t padding() const { return kernel / 2; }
  void validate() const;
  // (Cin, Hq, Wq, Hs, Ws) -> (Cout, Hq', Wq', Hs', Ws'), n' = (n + 2 pad - k) / s + 1.
  Shape output_dims(const Shape& input) const;
};

// Learnable tensors of one 4D convolution. Which members are populated
// depends on the variant; unused members stay empty.
//
//   kOriginal:    weight (out, in, k, k, k, k) indexed by query offsets then
//                 support offsets, bias (out).
//   kCenterPivot: support_weight = k(0, :) convolved over the support plane of
//                 each query position, query_weight = k(:, 0) convolved over
//                 the query plane of each support position, (out, in, k, k)
//                 each, and one bias per 2D kernel.
//   kSeparable:   support_weight (out, in, k, k), a per-channel affine
//                 normalization (norm_scale, norm_shift), then query_weight
//                 (out, out, k, k) with query_bias.
template <typename T>
struct Kernel4d {
  Conv4dVariant variant = Conv4dVariant::kCenterPivot;
  Tensor<T> weight, bias;
  Tensor<T> support_weight, support_bias;
  Tensor<T> query_weight, query_bias;
  Tensor<T> norm_scale, norm_shift;

  static Kernel4d zeros(const Conv4dConfig& cfg);
};

// Planar building blocks shared by the center-pivot and separable variants.
// Both take x (Cin, Hq, Wq, Hs, Ws) and w (Cout, Cin, k, k), pad by k/2 and
// honor all four strides.
//
// support_conv: out(o,i,j,a,b) = sum w(o,c,u,v) x(c, i*sq, j*sq, a*ss-p+u, b*ss-p+v)
// query_conv:   out(o,i,j,a,b) = sum w(o,c,u,v) x(c, i*sq-p+u, j*sq-p+v, a*ss, b*ss)
template <typename T>
Tensor<T> support_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Stride4 stride);
template <typename T>
Tensor<T> query_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Stride4 stride);

template <typename T>
struct PlanarGrads {
  Tensor<T> input;   // empty unless requested
  Tensor<T> weight;
  Tensor<T> bias;    // empty when the forward had no bias
};

template <typename T>
PlanarGrads<T> support_conv_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w,
                                     bool has_bias, Stride4 stride, bool need_input);
template <typename T>
PlanarGrads<T> query_conv_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& w,
                                   bool has_bias, Stride4 stride, bool need_input);

// Direct evaluation of the dense 4D convolution; the ground truth the other
// variants are checked against.
template <typename T>
Tensor<T> conv4d_original(const Tensor<T>& x, const Kernel4d<T>& k, const Conv4dConfig& cfg);

// Sum of a support-plane and a query-plane 2D convolution. The center tap is
// reached by both kernels, so its effective dense weight is the sum of the
// two 2D kernel centers.
template <typename T>
Tensor<T> conv4d_center_pivot(const Tensor<T>& x, const Kernel4d<T>& k, const Conv4dConfig& cfg);

// Sequential approximation: support conv, per-channel affine normalization,
// query conv. Comparative baseline only.
template <typename T>
Tensor<T> conv4d_separable(const Tensor<T>& x, const Kernel4d<T>& k, const Conv4dConfig& cfg);

template <typename T>
Tensor<T> conv4d(const Tensor<T>& x, const Kernel4d<T>& k, const Conv4dConfig& cfg);

template <typename T>
struct Conv4dGrads {
  Tensor<T> input;
  Kernel4d<T> kernel;
};

template <typename T>
Conv4dGrads<T> conv4d_backward(const Tensor<T>& grad_out, const Tensor<T>& x, const Kernel4d<T>& k,
                               const Conv4dConfig& cfg, bool need_input = true);

// Dense (out, in, k, k, k, k) kernel that is zero off the center-pivot
// support, with the center tap set to the sum of both 2D centers and the two
// biases folded together.
template <typename T>
Kernel4d<T> center_pivot_as_dense(const Kernel4d<T>& cp, const Conv4dConfig& cfg);

}  // namespace hsnet
