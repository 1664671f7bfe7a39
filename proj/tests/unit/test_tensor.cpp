// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "hsnet/tensor_ops.hpp"
#include "test_util.hpp"

using namespace hsnet;
using tu::random_tensor;

namespace {

// Half-pixel-center bilinear sample of one (H, W) plane, written out directly.
double sample(const Tensor<double>& img, std::size_t c, double y, double x) {
  const double h = static_cast<double>(img.dim(1)), w = static_cast<double>(img.dim(2));
  y = std::max(0.0, y);
  x = std::max(0.0, x);
  const auto y0 = static_cast<std::size_t>(std::floor(y)), x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min<std::size_t>(y0 + 1, static_cast<std::size_t>(h) - 1);
  const std::size_t x1 = std::min<std::size_t>(x0 + 1, static_cast<std::size_t>(w) - 1);
  const double fy = std::min(y - y0, 1.0), fx = std::min(x - x0, 1.0);
  const std::size_t yy0 = std::min<std::size_t>(y0, img.dim(1) - 1), xx0 = std::min<std::size_t>(x0, img.dim(2) - 1);
  return (1 - fy) * ((1 - fx) * img(c, yy0, xx0) + fx * img(c, yy0, x1)) +
         fy * ((1 - fx) * img(c, y1, xx0) + fx * img(c, y1, x1));
}

Tensor<double> oracle_resize(const Tensor<double>& img, std::size_t oh, std::size_t ow) {
  Tensor<double> out({img.dim(0), oh, ow});
  for (std::size_t c = 0; c < img.dim(0); ++c) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double y = (i + 0.5) * img.dim(1) / oh - 0.5;
        const double x = (j + 0.5) * img.dim(2) / ow - 0.5;
        out(c, i, j) = sample(img, c, y, x);
      }
    }
  }
  return out;
}

}  // namespace

TEST(Tensor, ConstructionAndIndexing) {
  Tensor<float> t({2, 3, 4}, 1.5f);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  t(1, 2, 3) = 7.0f;
  EXPECT_EQ(t[23], 7.0f);
  const std::size_t idx[] = {1, 0, 2};
  EXPECT_EQ(t.offset(idx), 14u);
  EXPECT_EQ(t.reshaped({6, 4}).dims(), (Shape{6, 4}));
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_CODE(Tensor<float>({2, 0, 3}), ErrorCode::kInvalidShape);
  EXPECT_CODE(Tensor<float>(Shape{}), ErrorCode::kInvalidShape);
  EXPECT_CODE(Tensor<float>({2, 2}, std::vector<float>(3)), ErrorCode::kInvalidShape);
  Tensor<float> t({2, 3});
  const std::size_t bad[] = {2, 0};
  EXPECT_CODE(t.offset(bad), ErrorCode::kInvalidShape);
  EXPECT_CODE(t.reshaped({5}), ErrorCode::kInvalidShape);
}

TEST(Tensor, CastRoundTrip) {
  Tensor<double> d({3}, std::vector<double>{0.25, -1.0, 3.5});
  EXPECT_EQ(d.cast<float>().cast<double>(), d);
}

TEST(BilinearResize, HandComputedUpsample) {
  Tensor<double> img({1, 2, 2}, std::vector<double>{0, 1, 2, 3});
  const auto out = bilinear_resize(img, 4, 4);
  const std::vector<double> expected = {0,   0.25, 0.75, 1,   0.5, 0.75, 1.25, 1.5,
                                        1.5, 1.75, 2.25, 2.5, 2,   2.25, 2.75, 3};
  ASSERT_EQ(out.dims(), (Shape{1, 4, 4}));
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_DOUBLE_EQ(out[i], expected[i]) << i;
}

TEST(BilinearResize, MatchesDirectFormula) {
  std::mt19937_64 rng(3);
  for (auto [h, w, oh, ow] : {std::array<std::size_t, 4>{5, 7, 13, 4}, {13, 13, 25, 25}, {25, 25, 50, 50},
                              {8, 8, 64, 64}, {6, 3, 2, 9}, {1, 1, 3, 3}}) {
    const auto img = random_tensor<double>({2, h, w}, rng);
    EXPECT_LT(tu::max_diff(bilinear_resize(img, oh, ow), oracle_resize(img, oh, ow)), 1e-12);
  }
}

TEST(BilinearResize, ConstantStaysExactAndIdentityAtSameSize) {
  Tensor<float> c({3, 5, 4}, 0.3f);
  const auto r = bilinear_resize(c, 11, 7);
  for (float v : r.values()) EXPECT_EQ(v, 0.3f);
  std::mt19937_64 rng(1);
  const auto x = random_tensor<float>({2, 6, 6, 2, 2}, rng);
  EXPECT_EQ(bilinear_resize(x, 6, 6), x);
}

TEST(BilinearResize, ActsPerTrailingPosition) {
  std::mt19937_64 rng(5);
  const auto x = random_tensor<double>({2, 4, 5, 2, 3}, rng);
  const auto y = bilinear_resize(x, 7, 3);
  ASSERT_EQ(y.dims(), (Shape{2, 7, 3, 2, 3}));
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      Tensor<double> plane({2, 4, 5});
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 4; ++i)
          for (std::size_t j = 0; j < 5; ++j) plane(c, i, j) = x(c, i, j, a, b);
      const auto r = oracle_resize(plane, 7, 3);
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 7; ++i)
          for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(y(c, i, j, a, b), r(c, i, j), 1e-12);
    }
  }
}

TEST(BilinearResize, BackwardIsAdjoint) {
  std::mt19937_64 rng(9);
  const auto x = random_tensor<double>({3, 13, 13}, rng);
  const auto g = random_tensor<double>({3, 25, 25}, rng);
  const double lhs = tu::dot(bilinear_resize(x, 25, 25), g);
  const double rhs = tu::dot(x, bilinear_resize_backward(g, 13, 13));
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(BilinearResize, RejectsLowRank) {
  EXPECT_CODE(bilinear_resize(Tensor<float>({4, 4}), 2, 2), ErrorCode::kInvalidShape);
}

TEST(AvgPool, AveragesSupportDims) {
  std::mt19937_64 rng(2);
  const auto x = random_tensor<double>({2, 3, 3, 2, 2}, rng);
  const auto z = avg_pool_support_dims(x);
  ASSERT_EQ(z.dims(), (Shape{2, 3, 3}));
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        const double m = (x(c, i, j, 0, 0) + x(c, i, j, 0, 1) + x(c, i, j, 1, 0) + x(c, i, j, 1, 1)) / 4;
        EXPECT_NEAR(z(c, i, j), m, 1e-15);
      }
  const auto g = random_tensor<double>({2, 3, 3}, rng);
  EXPECT_NEAR(tu::dot(z, g), tu::dot(x, avg_pool_support_dims_backward(g, 2, 2)), 1e-12);
  EXPECT_CODE(avg_pool_support_dims(Tensor<double>({2, 3, 3})), ErrorCode::kInvalidShape);
}

TEST(Softmax, TwoChannelValues) {
  Tensor<double> logits({2, 1, 2}, std::vector<double>{3, 0, 1, 0});
  const auto p = softmax_channel(logits);
  // Pixel 0 holds logits (3, 1).
  EXPECT_NEAR(p(0, 0, 0), 0.8807970779778823, 1e-15);
  EXPECT_NEAR(p(1, 0, 0), 0.11920292202211755, 1e-15);
  EXPECT_NEAR(p(0, 0, 1), 0.5, 1e-15);
  // Large logits do not overflow.
  Tensor<float> big({2, 1, 1}, std::vector<float>{1000.f, 999.f});
  const auto q = softmax_channel(big);
  EXPECT_NEAR(q[0] + q[1], 1.0f, 1e-6f);
  EXPECT_NEAR(q[0], 0.7310585786f, 1e-6f);
  EXPECT_CODE(softmax_channel(Tensor<double>({1, 2, 2})), ErrorCode::kInvalidShape);
}

TEST(Elementwise, ReluAddAccumulate) {
  Tensor<float> x({4}, std::vector<float>{-1, 0, 2, -3});
  EXPECT_EQ(relu(x), (Tensor<float>({4}, std::vector<float>{0, 0, 2, 0})));
  Tensor<float> g({4}, 1.0f);
  EXPECT_EQ(relu_backward(g, x), (Tensor<float>({4}, std::vector<float>{0, 0, 1, 0})));
  EXPECT_EQ(add(x, g), (Tensor<float>({4}, std::vector<float>{0, 1, 3, -2})));
  accumulate(x, g, 2.0f);
  EXPECT_EQ(x, (Tensor<float>({4}, std::vector<float>{1, 2, 4, -1})));
  EXPECT_CODE(add(x, Tensor<float>({3})), ErrorCode::kInvalidShape);
}
