// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "hsnet/conv4d.hpp"
#include "hsnet/tensor.hpp"

namespace hsnet {

enum class Backbone { kVgg16, kResNet50, kResNet101, kToy };

std::string_view to_string(Backbone backbone);
Backbone parse_backbone(std::string_view name);  // vgg16 | resnet50 | resnet101 | toy

// Square feature maps of one pyramid level.
struct FeatureLevel {
  std::size_t layers = 1;
  std::size_t channels = 1;
  std::size_t size = 1;
};

struct BackboneSchedule {
  Backbone tag = Backbone::kResNet101;
  std::size_t image_size = 400;
  std::array<FeatureLevel, 3> levels;  // levels[0] is the finest (p = 1)

  std::size_t layer_count() const;
  std::vector<std::size_t> group_sizes() const;
  // (C_l, H_l, W_l) per layer, shallow to deep.
  std::vector<Shape> feature_shapes() const;
};

BackboneSchedule backbone_schedule(Backbone backbone);

struct LayerSpec {
  std::size_t out_channels = 128;
  std::size_t kernel = 3;
  std::size_t support_stride = 1;  // query dims are never strided
};

// Three (4D conv, group norm, ReLU) stages.
struct BlockConfig {
  std::size_t in_channels = 1;
  std::array<LayerSpec, 3> layers;
  std::size_t groups = 4;
  Conv4dVariant variant = Conv4dVariant::kCenterPivot;

  Conv4dConfig conv_config(std::size_t stage) const;
  std::size_t out_channels() const { return layers[2].out_channels; }
};

// conv in->mid1, ReLU, conv mid1->mid2, ReLU, x2 upsample,
// conv mid2->mid2, ReLU, conv mid2->classes, upsample to the image size.
struct DecoderConfig {
  std::size_t in_channels = 128;
  std::size_t mid1 = 128;
  std::size_t mid2 = 64;
  std::size_t classes = 2;
  std::size_t kernel = 3;
};

struct Architecture {
  BackboneSchedule backbone;
  std::array<BlockConfig, 3> squeeze;  // squeeze[p - 1] is f_p^sqz
  std::array<BlockConfig, 2> mix;      // mix[0] is f_1^mix, mix[1] is f_2^mix
  DecoderConfig decoder;

  Conv4dVariant variant() const { return squeeze[0].variant; }
  void validate() const;
};

// The schedules below reproduce every intermediate shape and parameter count
// of the reference architectures; the toy schedule is for desk-scale tests.
Architecture make_architecture(Backbone backbone, Conv4dVariant variant = Conv4dVariant::kCenterPivot,
                               std::size_t groups = 4);

}  // namespace hsnet
