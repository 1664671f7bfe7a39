// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "hsnet/accounting.hpp"
#include "test_util.hpp"

using namespace hsnet;

namespace {

// Independent per-block formula: each stage is a 4D conv plus group-norm
// affine (2 per channel).
std::uint64_t block_oracle(std::size_t in, const std::array<std::pair<std::size_t, std::size_t>, 3>& out_k,
                           Conv4dVariant v) {
  std::uint64_t n = 0;
  for (auto [out, k] : out_k) {
    switch (v) {
      case Conv4dVariant::kCenterPivot:
        n += 2 * (in * out * k * k + out);
        break;
      case Conv4dVariant::kOriginal:
        n += in * out * k * k * k * k + out;
        break;
      case Conv4dVariant::kSeparable:
        n += in * out * k * k + 2 * out + out * out * k * k + out;
        break;
    }
    n += 2 * out;
    in = out;
  }
  return n;
}

const std::array<std::pair<std::size_t, std::size_t>, 3> kSqz1 = {{{16, 5}, {64, 5}, {128, 3}}};
const std::array<std::pair<std::size_t, std::size_t>, 3> kSqz2 = {{{16, 5}, {64, 3}, {128, 3}}};
const std::array<std::pair<std::size_t, std::size_t>, 3> kSqz3 = {{{16, 3}, {64, 3}, {128, 3}}};
const std::array<std::pair<std::size_t, std::size_t>, 3> kMix = {{{128, 3}, {128, 3}, {128, 3}}};

}  // namespace

TEST(Params, SingleLayers) {
  Conv4dConfig cfg;
  cfg.in_channels = cfg.out_channels = 128;
  EXPECT_EQ(conv4d_param_count(cfg), 295168u);
  cfg.variant = Conv4dVariant::kOriginal;
  EXPECT_EQ(conv4d_param_count(cfg), 1327232u);
  cfg.bias = false;
  EXPECT_EQ(conv4d_param_count(cfg), 1327104u);
  EXPECT_EQ(conv2d_param_count(128, 64, 3), 73792u);
  EXPECT_EQ(conv2d_param_count(128, 64, 3, false), 73728u);
  EXPECT_EQ(group_norm_param_count(128), 256u);
}

TEST(Params, ResNet101CenterPivot) {
  const auto r = count_params(make_architecture(Backbone::kResNet101));
  EXPECT_EQ(r.block("sqz3"), 167584u);
  EXPECT_EQ(r.block("sqz2"), 185120u);
  EXPECT_EQ(r.block("sqz1"), 202688u);
  EXPECT_EQ(r.block("mix2"), 886272u);
  EXPECT_EQ(r.block("mix1"), 886272u);
  EXPECT_EQ(r.block("decoder"), 259458u);
  EXPECT_EQ(r.total, 2587394u);
  EXPECT_EQ(r.block("sqz3"), block_oracle(3, kSqz3, Conv4dVariant::kCenterPivot));
  EXPECT_EQ(r.block("sqz2"), block_oracle(23, kSqz2, Conv4dVariant::kCenterPivot));
  EXPECT_EQ(r.block("sqz1"), block_oracle(4, kSqz1, Conv4dVariant::kCenterPivot));
  EXPECT_EQ(r.block("mix1"), block_oracle(128, kMix, Conv4dVariant::kCenterPivot));
  EXPECT_EQ(r.block("decoder"), 128u * 128 * 9 + 128 + 64 * 128 * 9 + 64 + 64 * 64 * 9 + 64 + 2 * 64 * 9 + 2);
  EXPECT_CODE(r.block("nope"), ErrorCode::kInvalidSpec);
}

TEST(Params, OtherBackbones) {
  const auto vgg = count_params(make_architecture(Backbone::kVgg16));
  EXPECT_EQ(vgg.block("sqz3"), block_oracle(1, kSqz3, Conv4dVariant::kCenterPivot));
  EXPECT_EQ(vgg.block("sqz2"), block_oracle(3, kSqz2, Conv4dVariant::kCenterPivot));
  EXPECT_EQ(vgg.block("sqz1"), block_oracle(3, kSqz1, Conv4dVariant::kCenterPivot));
  EXPECT_EQ(vgg.block("sqz3"), 167008u);
  EXPECT_EQ(vgg.block("sqz2"), 169120u);
  EXPECT_EQ(vgg.block("sqz1"), 201888u);
  const auto r50 = count_params(make_architecture(Backbone::kResNet50));
  EXPECT_EQ(r50.block("sqz3"), 167584u);
  EXPECT_EQ(r50.block("sqz2"), 171520u);
  EXPECT_EQ(r50.block("sqz1"), 202688u);
}

TEST(Params, OriginalAndSeparable) {
  const auto orig = count_params(make_architecture(Backbone::kResNet101, Conv4dVariant::kOriginal));
  EXPECT_EQ(orig.block("mix1"), 3u * (81 * 128 * 128 + 128) + 3 * 2 * 128);
  EXPECT_EQ(orig.block("mix1"), block_oracle(128, kMix, Conv4dVariant::kOriginal));
  EXPECT_EQ(orig.block("sqz1"), block_oracle(4, kSqz1, Conv4dVariant::kOriginal));
  EXPECT_EQ(orig.total, 11296690u);
  const auto sep = count_params(make_architecture(Backbone::kResNet101, Conv4dVariant::kSeparable));
  EXPECT_EQ(sep.block("mix2"), block_oracle(128, kMix, Conv4dVariant::kSeparable));
  EXPECT_EQ(sep.block("sqz2"), block_oracle(23, kSqz2, Conv4dVariant::kSeparable));
  std::uint64_t sum = 0;
  for (const auto& b : sep.blocks) sum += b.params;
  EXPECT_EQ(sep.total, sum);
}

TEST(Params, Rounding) {
  EXPECT_EQ(round_thousands(167584), "168K");
  EXPECT_EQ(round_thousands(169120), "169K");
  EXPECT_EQ(round_thousands(499), "0K");
  EXPECT_EQ(round_thousands(500), "1K");
  EXPECT_EQ(round_millions(2587394), "2.6M");
  EXPECT_EQ(round_millions(11296690), "11.3M");
  EXPECT_EQ(round_millions(2549999), "2.5M");
}

TEST(Params, ExpectedTableAgreesForGatingRows) {
  for (const auto& row : expected_counts()) {
    if (!row.gating) continue;
    const auto r = count_params(make_architecture(row.backbone, row.variant));
    for (const auto& [name, text] : row.blocks) EXPECT_EQ(round_thousands(r.block(name)), text) << name;
    if (row.total) {
      EXPECT_EQ(round_millions(r.total), *row.total);
    }
  }
}

TEST(Flops, SingleCenterPivotLayer) {
  Conv4dConfig cfg;
  EXPECT_EQ(conv4d_flops(cfg, {1, 4, 4, 4, 4}), 9216u);
  EXPECT_EQ(conv4d_weights_per_output(cfg), 18u);
  cfg.variant = Conv4dVariant::kOriginal;
  EXPECT_EQ(conv4d_flops(cfg, {1, 4, 4, 4, 4}), 2u * 256 * 81);
  cfg.variant = Conv4dVariant::kSeparable;
  // support stage 9 MACs, affine 1, query stage 9 per output.
  EXPECT_EQ(conv4d_flops(cfg, {1, 4, 4, 4, 4}), 2u * 256 * 19);
  EXPECT_CODE(conv4d_weights_per_output(cfg), ErrorCode::kInvalidSpec);
  EXPECT_EQ(conv2d_flops(4, 8, 3, 5, 6), 2u * 8 * 30 * 36);
}

TEST(Flops, StridedOutputCount) {
  Conv4dConfig cfg;
  cfg.in_channels = 2;
  cfg.out_channels = 3;
  cfg.stride = {1, 1, 2, 2};
  // Output (3, 5, 5, 3, 3).
  EXPECT_EQ(conv4d_flops(cfg, {2, 5, 5, 6, 6}), 2u * 3 * 25 * 9 * (2 * 2 * 9));
}

TEST(Flops, WeightRatioAtKernelThree) {
  for (std::size_t in : {1u, 16u, 128u}) {
    Conv4dConfig cp;
    cp.in_channels = in;
    Conv4dConfig orig = cp;
    orig.variant = Conv4dVariant::kOriginal;
    EXPECT_EQ(double(conv4d_weights_per_output(orig)) / double(conv4d_weights_per_output(cp)), 4.5);
  }
}

TEST(Flops, VariantOrderingAtFullScale) {
  for (auto bb : {Backbone::kVgg16, Backbone::kResNet50, Backbone::kResNet101}) {
    const auto cp = count_flops(make_architecture(bb, Conv4dVariant::kCenterPivot)).total;
    const auto sep = count_flops(make_architecture(bb, Conv4dVariant::kSeparable)).total;
    const auto orig = count_flops(make_architecture(bb, Conv4dVariant::kOriginal)).total;
    EXPECT_LT(cp, sep) << to_string(bb);
    EXPECT_LT(sep, orig) << to_string(bb);
  }
}

TEST(Flops, ReportSumsLayers) {
  const auto r = count_flops(make_architecture(Backbone::kResNet101));
  std::uint64_t sum = 0;
  for (const auto& l : r.layers) sum += l.flops;
  EXPECT_EQ(sum, r.total);
  EXPECT_EQ(r.layers.size(), 5u * 3 + 4);
  EXPECT_CODE(count_flops(std::vector<Conv4dConfig>(2), std::vector<Shape>(1)), ErrorCode::kInvalidInput);
}
