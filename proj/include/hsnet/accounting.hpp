// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hsnet/architecture.hpp"

namespace hsnet {

std::uint64_t conv4d_param_count(const Conv4dConfig& cfg);
std::uint64_t conv2d_param_count(std::size_t in, std::size_t out, std::size_t kernel, bool bias = true);
std::uint64_t group_norm_param_count(std::size_t channels);

// Kernel weights one output element reads (biases and normalization
// excluded): in*k^4 for the dense kernel, 2*in*k^2 for center-pivot. Not
// defined for the separable variant, whose two stages have different widths.
std::uint64_t conv4d_weights_per_output(const Conv4dConfig& cfg);

// 2 FLOPs per multiply-accumulate; the separable variant's affine step counts
// as one multiply-accumulate per element. Biases, group norm, ReLU and resizes
// are not counted.
std::uint64_t conv4d_flops(const Conv4dConfig& cfg, const Shape& input);
std::uint64_t conv2d_flops(std::size_t in, std::size_t out, std::size_t kernel, std::size_t h, std::size_t w);

struct BlockCount {
  std::string name;  // sqz3, sqz2, sqz1, mix2, mix1, decoder
  std::uint64_t params = 0;
};

struct ParamReport {
  std::vector<BlockCount> blocks;
  std::uint64_t total = 0;
  std::uint64_t block(const std::string& name) const;
};

ParamReport count_params(const Architecture& arch);

struct LayerFlops {
  std::string name;
  Shape input;
  Shape output;
  std::uint64_t flops = 0;
};

struct FlopsReport {
  std::vector<LayerFlops> layers;
  std::uint64_t total = 0;
};

// Generic form: one entry per 4D conv with its input shape.
FlopsReport count_flops(const std::vector<Conv4dConfig>& layers, const std::vector<Shape>& inputs);
// Whole network at the architecture's own shapes, decoder convs included.
FlopsReport count_flops(const Architecture& arch);

// "168K", "2.6M": nearest integer in thousands, one decimal in millions.
std::string round_thousands(std::uint64_t n);
std::string round_millions(std::uint64_t n);

// Per-block counts printed in the reference architecture tables, in
// thousands, and the model-size column of the kernel comparison, in
// millions. Absent entries are not stated there.
struct ExpectedCounts {
  Backbone backbone;
  Conv4dVariant variant;
  std::vector<std::pair<std::string, std::string>> blocks;
  std::optional<std::string> total;
  bool gating = true;  // false: printed for comparison, never a failure
};

const std::vector<ExpectedCounts>& expected_counts();

}  // namespace hsnet
