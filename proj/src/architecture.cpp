// SPDX-License-Identifier: Apache-2.0
#include "hsnet/architecture.hpp"

#include <string>

namespace hsnet {
namespace {

std::array<LayerSpec, 3> stages(std::array<std::size_t, 3> channels, std::array<std::size_t, 3> kernels,
                                std::array<std::size_t, 3> strides) {
  std::array<LayerSpec, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) out[i] = {channels[i], kernels[i], strides[i]};
  return out;
}

std::size_t strided(std::size_t n, std::size_t k, std::size_t s) { return (n + 2 * (k / 2) - k) / s + 1; }

}  // namespace

std::string_view to_string(Backbone backbone) {
  switch (backbone) {
    case Backbone::kVgg16: return "vgg16";
    case Backbone::kResNet50: return "resnet50";
    case Backbone::kResNet101: return "resnet101";
    case Backbone::kToy: return "toy";
  }
  return "unknown";
}

Backbone parse_backbone(std::string_view name) {
  if (name == "vgg16") return Backbone::kVgg16;
  if (name == "resnet50") return Backbone::kResNet50;
  if (name == "resnet101") return Backbone::kResNet101;
  if (name == "toy") return Backbone::kToy;
  throw Error(ErrorCode::kInvalidSpec, "unknown backbone '" + std::string(name) + "'");
}

std::size_t BackboneSchedule::layer_count() const {
  return levels[0].layers + levels[1].layers + levels[2].layers;
}

std::vector<std::size_t> BackboneSchedule::group_sizes() const {
  return {levels[0].layers, levels[1].layers, levels[2].layers};
}

std::vector<Shape> BackboneSchedule::feature_shapes() const {
  std::vector<Shape> shapes;
  for (const auto& lvl : levels) {
    for (std::size_t i = 0; i < lvl.layers; ++i) shapes.push_back({lvl.channels, lvl.size, lvl.size});
  }
  return shapes;
}

BackboneSchedule backbone_schedule(Backbone backbone) {
  switch (backbone) {
    case Backbone::kVgg16:
      return {backbone, 400, {{{3, 512, 50}, {3, 512, 25}, {1, 512, 12}}}};
    case Backbone::kResNet50:
      return {backbone, 400, {{{4, 512, 50}, {6, 1024, 25}, {3, 2048, 13}}}};
    case Backbone::kResNet101:
      return {backbone, 400, {{{4, 512, 50}, {23, 1024, 25}, {3, 2048, 13}}}};
    case Backbone::kToy:
      return {backbone, 64, {{{2, 32, 8}, {2, 32, 4}, {1, 32, 2}}}};
  }
  throw Error(ErrorCode::kInvalidSpec, "unknown backbone");
}

Conv4dConfig BlockConfig::conv_config(std::size_t stage) const {
  Conv4dConfig cfg;
  cfg.in_channels = stage == 0 ? in_channels : layers[stage - 1].out_channels;
  cfg.out_channels = layers[stage].out_channels;
  cfg.kernel = layers[stage].kernel;
  cfg.stride = {1, 1, layers[stage].support_stride, layers[stage].support_stride};
  cfg.variant = variant;
  cfg.bias = true;
  return cfg;
}

void Architecture::validate() const {
  // Every squeeze block must land on the same support extent so the
  // top-down additions line up.
  std::size_t common = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    const auto& blk = squeeze[p];
    if (blk.in_channels != backbone.levels[p].layers) {
      throw Error(ErrorCode::kInvalidSpec, "squeeze block " + std::to_string(p + 1) + " expects " +
                                               std::to_string(blk.in_channels) + " correlation channels");
    }
    std::size_t n = backbone.levels[p].size;
    for (const auto& l : blk.layers) n = strided(n, l.kernel, l.support_stride);
    if (p == 0) common = n;
    if (n != common) throw Error(ErrorCode::kInvalidSpec, "squeeze blocks end on different support extents");
    if (blk.out_channels() != mix[0].in_channels) {
      throw Error(ErrorCode::kInvalidSpec, "squeeze and mix channel counts differ");
    }
  }
  for (const auto& blk : mix) {
    for (const auto& l : blk.layers) {
      if (l.support_stride != 1) throw Error(ErrorCode::kInvalidSpec, "mix blocks must use stride 1");
    }
  }
  if (decoder.in_channels != mix[0].out_channels()) {
    throw Error(ErrorCode::kInvalidSpec, "decoder input channels differ from encoder output");
  }
}

Architecture make_architecture(Backbone backbone, Conv4dVariant variant, std::size_t groups) {
  Architecture arch;
  arch.backbone = backbone_schedule(backbone);
  const bool toy = backbone == Backbone::kToy;
  const std::array<std::size_t, 3> channels = toy ? std::array<std::size_t, 3>{8, 16, 32}
                                                  : std::array<std::size_t, 3>{16, 64, 128};
  const std::size_t width = channels[2];

  if (toy) {
    arch.squeeze[0].layers = stages(channels, {3, 3, 3}, {2, 2, 1});
    arch.squeeze[1].layers = stages(channels, {3, 3, 3}, {2, 1, 1});
    arch.squeeze[2].layers = stages(channels, {3, 3, 3}, {1, 1, 1});
    arch.decoder = {width, 32, 16, 2, 3};
  } else {
    arch.squeeze[0].layers = stages(channels, {5, 5, 3}, {4, 4, 2});
    arch.squeeze[1].layers = stages(channels, {5, 3, 3}, {4, 2, 2});
    arch.squeeze[2].layers = stages(channels, {3, 3, 3}, {2, 2, 2});
    arch.decoder = {width, 128, 64, 2, 3};
  }
  for (std::size_t p = 0; p < 3; ++p) {
    arch.squeeze[p].in_channels = arch.backbone.levels[p].layers;
    arch.squeeze[p].groups = groups;
    arch.squeeze[p].variant = variant;
  }
  for (auto& blk : arch.mix) {
    blk.in_channels = width;
    blk.layers = stages({width, width, width}, {3, 3, 3}, {1, 1, 1});
    blk.groups = groups;
    blk.variant = variant;
  }
  arch.validate();
  return arch;
}

}  // namespace hsnet
