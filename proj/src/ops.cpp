// SPDX-License-Identifier: Apache-2.0
#include "hsnet/ops.hpp"

#include <algorithm>
#include <cmath>

#include "hsnet/correlation.hpp"
#include "hsnet/layers.hpp"
#include "hsnet/tensor_ops.hpp"

namespace hsnet::ad {
namespace {

template <typename T>
void add_into(Tensor<T>* dst, const Tensor<T>& g) {
  if (dst != nullptr) accumulate(*dst, g);
}

template <typename T>
using KernelField = Tensor<T> Kernel4d<T>::*;

template <typename T>
struct BoundField {
  KernelField<T> field;
  Var var;
};

template <typename T>
std::vector<BoundField<T>> bind_fields(const Kernel4dVars& k) {
  std::vector<BoundField<T>> out;
  auto bind = [&](const std::optional<Var>& v, KernelField<T> f) {
    if (v) out.push_back({f, *v});
  };
  bind(k.weight, &Kernel4d<T>::weight);
  bind(k.bias, &Kernel4d<T>::bias);
  bind(k.support_weight, &Kernel4d<T>::support_weight);
  bind(k.support_bias, &Kernel4d<T>::support_bias);
  bind(k.query_weight, &Kernel4d<T>::query_weight);
  bind(k.query_bias, &Kernel4d<T>::query_bias);
  bind(k.norm_scale, &Kernel4d<T>::norm_scale);
  bind(k.norm_shift, &Kernel4d<T>::norm_shift);
  return out;
}

}  // namespace

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  return tape.record(hsnet::add(tape.value(a), tape.value(b)), {a, b}, [](auto& ctx) {
    add_into(ctx.input_grad(0), ctx.grad_out());
    add_into(ctx.input_grad(1), ctx.grad_out());
  });
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  require_same_shape(va, vb, "mul");
  Tensor<T> out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  return tape.record(std::move(out), {a, b}, [](auto& ctx) {
    const auto& g = ctx.grad_out();
    if (auto* ga = ctx.input_grad(0)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * ctx.input(1)[i];
    }
    if (auto* gb = ctx.input_grad(1)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * ctx.input(0)[i];
    }
  });
}

template <typename T>
Var scale(Tape<T>& tape, Var a, T factor) {
  Tensor<T> out = tape.value(a);
  for (auto& v : out.values()) v *= factor;
  return tape.record(std::move(out), {a}, [factor](auto& ctx) {
    if (auto* ga = ctx.input_grad(0)) accumulate(*ga, ctx.grad_out(), factor);
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var a) {
  T total = 0;
  for (T v : tape.value(a).values()) total += v;
  return tape.record(Tensor<T>({1}, total), {a}, [](auto& ctx) {
    if (auto* ga = ctx.input_grad(0)) {
      const T g = ctx.grad_out()[0];
      for (auto& v : ga->values()) v += g;
    }
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var a) {
  return tape.record(hsnet::relu(tape.value(a)), {a}, [](auto& ctx) {
    if (auto* ga = ctx.input_grad(0)) accumulate(*ga, relu_backward(ctx.grad_out(), ctx.input(0)));
  });
}

template <typename T>
Var bilinear_resize(Tape<T>& tape, Var a, std::size_t out_h, std::size_t out_w) {
  return tape.record(hsnet::bilinear_resize(tape.value(a), out_h, out_w), {a}, [](auto& ctx) {
    if (auto* ga = ctx.input_grad(0)) {
      accumulate(*ga, bilinear_resize_backward(ctx.grad_out(), ctx.input(0).dim(1), ctx.input(0).dim(2)));
    }
  });
}

template <typename T>
Var avg_pool_support_dims(Tape<T>& tape, Var a) {
  return tape.record(hsnet::avg_pool_support_dims(tape.value(a)), {a}, [](auto& ctx) {
    if (auto* ga = ctx.input_grad(0)) {
      accumulate(*ga, avg_pool_support_dims_backward(ctx.grad_out(), ctx.input(0).dim(3), ctx.input(0).dim(4)));
    }
  });
}

template <typename T>
Var softmax_channel(Tape<T>& tape, Var logits) {
  return tape.record(hsnet::softmax_channel(tape.value(logits)), {logits}, [](auto& ctx) {
    auto* gl = ctx.input_grad(0);
    if (gl == nullptr) return;
    const auto& y = ctx.output();
    const auto& g = ctx.grad_out();
    const std::size_t channels = y.dim(0), plane = y.dim(1) * y.dim(2);
    for (std::size_t p = 0; p < plane; ++p) {
      T inner = 0;
      for (std::size_t c = 0; c < channels; ++c) inner += g[c * plane + p] * y[c * plane + p];
      for (std::size_t c = 0; c < channels; ++c) {
        (*gl)[c * plane + p] += y[c * plane + p] * (g[c * plane + p] - inner);
      }
    }
  });
}

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, std::optional<Var> bias) {
  const Tensor<T> no_bias;
  Tensor<T> out = hsnet::conv2d(tape.value(x), tape.value(weight), bias ? tape.value(*bias) : no_bias);
  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return tape.record(std::move(out), inputs, [has_bias](auto& ctx) {
    auto* gx = ctx.input_grad(0);
    auto g = conv2d_backward(ctx.grad_out(), ctx.input(0), ctx.input(1), has_bias, gx != nullptr);
    add_into(gx, g.input);
    add_into(ctx.input_grad(1), g.weight);
    if (has_bias) add_into(ctx.input_grad(2), g.bias);
  });
}

template <typename T>
Var group_norm(Tape<T>& tape, Var x, Var gamma, Var beta, std::size_t groups) {
  Tensor<T> out = hsnet::group_norm(tape.value(x), tape.value(gamma), tape.value(beta), groups);
  return tape.record(std::move(out), {x, gamma, beta}, [groups](auto& ctx) {
    auto g = group_norm_backward(ctx.grad_out(), ctx.input(0), ctx.input(1), groups);
    add_into(ctx.input_grad(0), g.input);
    add_into(ctx.input_grad(1), g.gamma);
    add_into(ctx.input_grad(2), g.beta);
  });
}

template <typename T>
Var correlation_4d(Tape<T>& tape, Var query, Var support) {
  return tape.record(hsnet::correlation_4d(tape.value(query), tape.value(support)), {query, support},
                     [](auto& ctx) {
                       auto g = correlation_4d_backward(ctx.grad_out(), ctx.input(0), ctx.input(1));
                       add_into(ctx.input_grad(0), g.query);
                       add_into(ctx.input_grad(1), g.support);
                     });
}

template <typename T>
Var conv4d(Tape<T>& tape, Var x, const Kernel4dVars& kernel, const Conv4dConfig& cfg) {
  const auto fields = bind_fields<T>(kernel);
  Kernel4d<T> k;
  k.variant = cfg.variant;
  std::vector<Var> inputs{x};
  for (const auto& f : fields) {
    k.*(f.field) = tape.value(f.var);
    inputs.push_back(f.var);
  }
  Tensor<T> out = hsnet::conv4d(tape.value(x), k, cfg);
  return tape.record(std::move(out), inputs, [fields, cfg](auto& ctx) {
    Kernel4d<T> kk;
    kk.variant = cfg.variant;
    for (std::size_t i = 0; i < fields.size(); ++i) kk.*(fields[i].field) = ctx.input(i + 1);
    auto* gx = ctx.input_grad(0);
    auto g = conv4d_backward(ctx.grad_out(), ctx.input(0), kk, cfg, gx != nullptr);
    add_into(gx, g.input);
    for (std::size_t i = 0; i < fields.size(); ++i) add_into(ctx.input_grad(i + 1), g.kernel.*(fields[i].field));
  });
}

template <typename T>
Var cross_entropy(Tape<T>& tape, Var logits, const Tensor<T>& labels) {
  const auto& l = tape.value(logits);
  require_rank(l, 3, "cross_entropy logits");
  require_rank(labels, 2, "cross_entropy labels");
  if (labels.dim(0) != l.dim(1) || labels.dim(1) != l.dim(2)) {
    throw Error(ErrorCode::kInvalidShape,
                "labels " + shape_string(labels.dims()) + " do not match logits " + shape_string(l.dims()));
  }
  const std::size_t channels = l.dim(0), plane = l.dim(1) * l.dim(2);
  std::size_t valid = 0;
  double total = 0;
  for (std::size_t p = 0; p < plane; ++p) {
    const double label = labels[p];
    if (label == kIgnoreLabel) continue;
    if (!(label >= 0 && label < static_cast<double>(channels)) || label != std::floor(label)) {
      throw Error(ErrorCode::kInvalidInput, "label " + std::to_string(label) + " is not a class or the ignore label");
    }
    double peak = l[p];
    for (std::size_t c = 1; c < channels; ++c) peak = std::max(peak, static_cast<double>(l[c * plane + p]));
    double z = 0;
    for (std::size_t c = 0; c < channels; ++c) z += std::exp(l[c * plane + p] - peak);
    total += peak + std::log(z) - l[static_cast<std::size_t>(label) * plane + p];
    ++valid;
  }
  if (valid == 0) throw Error(ErrorCode::kUndefinedLoss, "every pixel carries the ignore label");
  const T loss = static_cast<T>(total / static_cast<double>(valid));
  return tape.record(Tensor<T>({1}, loss), {logits}, [labels, valid](auto& ctx) {
    auto* gl = ctx.input_grad(0);
    if (gl == nullptr) return;
    const auto& lv = ctx.input(0);
    const std::size_t ch = lv.dim(0), pl = lv.dim(1) * lv.dim(2);
    const T scale_ = ctx.grad_out()[0] / static_cast<T>(valid);
    const Tensor<T> prob = hsnet::softmax_channel(lv);
    for (std::size_t p = 0; p < pl; ++p) {
      if (labels[p] == kIgnoreLabel) continue;
      const auto label = static_cast<std::size_t>(labels[p]);
      for (std::size_t c = 0; c < ch; ++c) {
        (*gl)[c * pl + p] += scale_ * (prob[c * pl + p] - (c == label ? T{1} : T{0}));
      }
    }
  });
}

#define HSNET_INSTANTIATE(T)                                                             \
  template Var add(Tape<T>&, Var, Var);                                                  \
  template Var mul(Tape<T>&, Var, Var);                                                  \
  template Var scale(Tape<T>&, Var, T);                                                  \
  template Var sum(Tape<T>&, Var);                                                       \
  template Var relu(Tape<T>&, Var);                                                      \
  template Var bilinear_resize(Tape<T>&, Var, std::size_t, std::size_t);                 \
  template Var avg_pool_support_dims(Tape<T>&, Var);                                     \
  template Var softmax_channel(Tape<T>&, Var);                                           \
  template Var conv2d(Tape<T>&, Var, Var, std::optional<Var>);                           \
  template Var group_norm(Tape<T>&, Var, Var, Var, std::size_t);                         \
  template Var correlation_4d(Tape<T>&, Var, Var);                                       \
  template Var conv4d(Tape<T>&, Var, const Kernel4dVars&, const Conv4dConfig&);          \
  template Var cross_entropy(Tape<T>&, Var, const Tensor<T>&);

HSNET_INSTANTIATE(float)
HSNET_INSTANTIATE(double)
#undef HSNET_INSTANTIATE

}  // namespace hsnet::ad
