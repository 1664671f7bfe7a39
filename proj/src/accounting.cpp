// SPDX-License-Identifier: Apache-2.0
#include "hsnet/accounting.hpp"

#include <cstdio>

namespace hsnet {

std::uint64_t conv4d_param_count(const Conv4dConfig& cfg) {
  cfg.validate();
  const std::uint64_t in = cfg.in_channels, out = cfg.out_channels, k = cfg.kernel;
  const std::uint64_t b = cfg.bias ? out : 0;
  switch (cfg.variant) {
    case Conv4dVariant::kOriginal: return out * in * k * k * k * k + b;
    case Conv4dVariant::kCenterPivot: return 2 * (out * in * k * k + b);
    case Conv4dVariant::kSeparable: return out * in * k * k + 2 * out + out * out * k * k + b;
  }
  return 0;
}

std::uint64_t conv2d_param_count(std::size_t in, std::size_t out, std::size_t kernel, bool bias) {
  return static_cast<std::uint64_t>(out) * in * kernel * kernel + (bias ? out : 0);
}

std::uint64_t group_norm_param_count(std::size_t channels) { return 2 * static_cast<std::uint64_t>(channels); }

std::uint64_t conv4d_weights_per_output(const Conv4dConfig& cfg) {
  const std::uint64_t in = cfg.in_channels, k = cfg.kernel;
  switch (cfg.variant) {
    case Conv4dVariant::kOriginal: return in * k * k * k * k;
    case Conv4dVariant::kCenterPivot: return 2 * in * k * k;
    case Conv4dVariant::kSeparable: break;
  }
  throw Error(ErrorCode::kInvalidSpec, "weights per output is undefined for the separable kernel");
}

std::uint64_t conv4d_flops(const Conv4dConfig& cfg, const Shape& input) {
  const Shape out = cfg.output_dims(input);
  const std::uint64_t n_out = shape_size(out);
  const std::uint64_t k2 = cfg.kernel * cfg.kernel;
  if (cfg.variant != Conv4dVariant::kSeparable) return 2 * n_out * conv4d_weights_per_output(cfg);
  // Support stage keeps the query extent, query stage then strides it.
  const Shape mid = {cfg.out_channels, input[1], input[2], out[3], out[4]};
  const std::uint64_t n_mid = shape_size(mid);
  return 2 * n_mid * cfg.in_channels * k2 + 2 * n_mid + 2 * n_out * cfg.out_channels * k2;
}

std::uint64_t conv2d_flops(std::size_t in, std::size_t out, std::size_t kernel, std::size_t h, std::size_t w) {
  return 2 * static_cast<std::uint64_t>(out) * h * w * in * kernel * kernel;
}

std::uint64_t ParamReport::block(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b.params;
  }
  throw Error(ErrorCode::kInvalidSpec, "no block '" + name + "'");
}

namespace {

std::uint64_t block_params(const BlockConfig& blk) {
  std::uint64_t n = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    n += conv4d_param_count(blk.conv_config(s)) + group_norm_param_count(blk.layers[s].out_channels);
  }
  return n;
}

std::uint64_t decoder_params(const DecoderConfig& d) {
  return conv2d_param_count(d.in_channels, d.mid1, d.kernel) + conv2d_param_count(d.mid1, d.mid2, d.kernel) +
         conv2d_param_count(d.mid2, d.mid2, d.kernel) + conv2d_param_count(d.mid2, d.classes, d.kernel);
}

}  // namespace

ParamReport count_params(const Architecture& arch) {
  ParamReport r;
  for (std::size_t p = 3; p-- > 0;) r.blocks.push_back({"sqz" + std::to_string(p + 1), block_params(arch.squeeze[p])});
  for (std::size_t p = 2; p-- > 0;) r.blocks.push_back({"mix" + std::to_string(p + 1), block_params(arch.mix[p])});
  r.blocks.push_back({"decoder", decoder_params(arch.decoder)});
  for (const auto& b : r.blocks) r.total += b.params;
  return r;
}

FlopsReport count_flops(const std::vector<Conv4dConfig>& layers, const std::vector<Shape>& inputs) {
  if (layers.size() != inputs.size()) throw Error(ErrorCode::kInvalidInput, "one input shape per layer");
  FlopsReport r;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerFlops l{"conv4d." + std::to_string(i), inputs[i], layers[i].output_dims(inputs[i]),
                 conv4d_flops(layers[i], inputs[i])};
    r.total += l.flops;
    r.layers.push_back(std::move(l));
  }
  return r;
}

FlopsReport count_flops(const Architecture& arch) {
  FlopsReport r;
  auto push = [&r](LayerFlops l) {
    r.total += l.flops;
    r.layers.push_back(std::move(l));
  };
  auto run = [&](const BlockConfig& blk, const std::string& name, Shape x) {
    for (std::size_t s = 0; s < 3; ++s) {
      const auto cfg = blk.conv_config(s);
      Shape y = cfg.output_dims(x);
      push({name + "." + std::to_string(s), x, y, conv4d_flops(cfg, x)});
      x = std::move(y);
    }
    return x;
  };
  std::array<Shape, 3> sq;
  for (std::size_t p = 3; p-- > 0;) {
    const auto& lvl = arch.backbone.levels[p];
    sq[p] = run(arch.squeeze[p], "sqz" + std::to_string(p + 1), {lvl.layers, lvl.size, lvl.size, lvl.size, lvl.size});
  }
  Shape mixed = sq[2];
  for (std::size_t p = 2; p-- > 0;) mixed = run(arch.mix[p], "mix" + std::to_string(p + 1), sq[p]);
  const auto& d = arch.decoder;
  const std::size_t h = mixed[1], w = mixed[2];
  const std::array<std::array<std::size_t, 4>, 4> convs = {
      {{d.in_channels, d.mid1, h, w}, {d.mid1, d.mid2, h, w}, {d.mid2, d.mid2, 2 * h, 2 * w},
       {d.mid2, d.classes, 2 * h, 2 * w}}};
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto [in, out, ch, cw] = convs[i];
    push({"decoder." + std::to_string(i), {in, ch, cw}, {out, ch, cw}, conv2d_flops(in, out, d.kernel, ch, cw)});
  }
  return r;
}

std::string round_thousands(std::uint64_t n) { return std::to_string((n + 500) / 1000) + "K"; }

std::string round_millions(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fM", static_cast<double>(n) / 1e6);
  return buf;
}

const std::vector<ExpectedCounts>& expected_counts() {
  using V = Conv4dVariant;
  static const std::vector<ExpectedCounts> table = {
      {Backbone::kVgg16, V::kCenterPivot,
       {{"sqz3", "167K"}, {"sqz2", "169K"}, {"sqz1", "202K"}, {"mix2", "886K"}, {"mix1", "886K"}, {"decoder", "259K"}},
       std::nullopt},
      {Backbone::kResNet50, V::kCenterPivot,
       {{"sqz3", "168K"}, {"sqz2", "172K"}, {"sqz1", "203K"}, {"mix2", "886K"}, {"mix1", "886K"}, {"decoder", "259K"}},
       std::nullopt},
      {Backbone::kResNet101, V::kCenterPivot,
       {{"sqz3", "168K"}, {"sqz2", "185K"}, {"sqz1", "203K"}, {"mix2", "886K"}, {"mix1", "886K"}, {"decoder", "259K"}},
       "2.6M"},
      {Backbone::kResNet101, V::kOriginal, {}, "11.3M"},
      // Our separable stage design differs from the one measured there.
      {Backbone::kResNet101, V::kSeparable, {}, "4.4M", false},
  };
  return table;
}

}  // namespace hsnet
