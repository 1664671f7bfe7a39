// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hsnet/decoder.hpp"
#include "hsnet/grad_check.hpp"
#include "hsnet/ops.hpp"
#include "test_util.hpp"

using namespace hsnet;

namespace {

Tensor<double> mask(std::size_t h, std::size_t w, std::vector<double> v) { return Tensor<double>({h, w}, std::move(v)); }

// Probabilities are recomputed from logits by the library; build logits
// whose softmax is the requested foreground probability.
Prediction<double> with_foreground(const std::vector<double>& p_fg, std::size_t h, std::size_t w) {
  Tensor<double> logits({2, h, w}, 0.0);
  for (std::size_t i = 0; i < h * w; ++i) logits[h * w + i] = std::log(p_fg[i] / (1 - p_fg[i]));
  return make_prediction(std::move(logits));
}

}  // namespace

TEST(Decoder, ToyAndFullShapes) {
  std::mt19937_64 rng(0);
  ParameterSet<float> params;
  Decoder<float> dec(DecoderConfig{32, 32, 16, 2, 3}, params, rng);
  Tape<float> tape;
  ShapeTrace trace;
  std::mt19937_64 data(1);
  Var y = dec.logits(tape, tape.constant(tu::random_tensor<float>({32, 8, 8}, data)), 64, 64, &trace);
  EXPECT_EQ(tape.value(y).dims(), (Shape{2, 64, 64}));
  const ShapeTrace expected = {{"decoder_stage1", {16, 8, 8}},
                               {"decoder_upsample", {16, 16, 16}},
                               {"decoder_stage2", {2, 16, 16}},
                               {"M_hat", {2, 64, 64}}};
  EXPECT_EQ(trace, expected);
  EXPECT_EQ(params.element_count(), 32u * 32 * 9 + 32 + 16 * 32 * 9 + 16 + 16 * 16 * 9 + 16 + 2 * 16 * 9 + 2);

  ParameterSet<float> full;
  Decoder<float> big(DecoderConfig{}, full, rng);
  EXPECT_EQ(full.element_count(), 259458u);
}

TEST(Decoder, ZeroParametersGiveUniformProbability) {
  std::mt19937_64 rng(0);
  ParameterSet<double> params;
  Decoder<double> dec(DecoderConfig{8, 8, 4, 2, 3}, params, rng);
  for (auto& p : params) p.value = Tensor<double>::zeros(p.value.dims());
  Tape<double> tape;
  std::mt19937_64 data(1);
  const auto pred =
      make_prediction(tape.value(dec.logits(tape, tape.constant(tu::random_tensor<double>({8, 6, 6}, data)), 20, 20)));
  for (double v : pred.probabilities.values()) EXPECT_EQ(v, 0.5);
  EXPECT_EQ(hard_mask(pred), Tensor<double>::zeros({20, 20}));
}

TEST(Decoder, GradientCheckAtSixBySix) {
  std::mt19937_64 rng(2);
  ParameterSet<double> params;
  Decoder<double> dec(DecoderConfig{8, 8, 4, 2, 3}, params, rng);
  std::mt19937_64 data(3);
  const auto z = tu::random_tensor<double>({8, 6, 6}, data);
  Tensor<double> gt({24, 24}, 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = (i * 7) % 5 < 2 ? 1.0 : ((i % 11) == 0 ? 255.0 : 0.0);
  auto f = [&](Tape<double>& t, Var v) { return ad::cross_entropy(t, dec.logits(t, v, 24, 24), gt); };
  EXPECT_LT(grad_check(f, z, 1e-6).max_rel_error, 1e-4);
  for (auto& p : params) {
    EXPECT_LT(grad_check_parameter([&](Tape<double>& t) { return f(t, t.constant(z)); }, p, 1e-6, 40, 1).max_rel_error,
              1e-4)
        << p.id;
  }
}

TEST(Prediction, ProbabilitiesSumToOne) {
  std::mt19937_64 rng(4);
  const auto pred = make_prediction(tu::random_tensor<double>({2, 5, 7}, rng, -20, 20));
  for (std::size_t i = 0; i < 35; ++i) {
    EXPECT_NEAR(pred.probabilities[i] + pred.probabilities[35 + i], 1.0, 1e-12);
  }
  EXPECT_CODE(make_prediction(Tensor<double>({3, 2, 2})), ErrorCode::kInvalidShape);
}

TEST(CrossEntropy, Examples) {
  const auto uniform = with_foreground({0.5, 0.5, 0.5, 0.5}, 2, 2);
  EXPECT_NEAR(cross_entropy(uniform, mask(2, 2, {0, 1, 1, 0})), std::log(2.0), 1e-15);

  // Two confident-correct pixels and two uniform ones.
  Tensor<double> logits({2, 2, 2}, 0.0);
  logits[0] = 800;  // pixel 0 background
  logits[5] = 800;  // pixel 1 foreground
  const auto half = make_prediction(logits);
  EXPECT_NEAR(cross_entropy(half, mask(2, 2, {0, 1, 1, 0})), 0.5 * std::log(2.0), 1e-15);
  EXPECT_EQ(cross_entropy(half, mask(2, 2, {0, 1, 255, 255})), 0.0);

  EXPECT_CODE(cross_entropy(half, mask(2, 2, {255, 255, 255, 255})), ErrorCode::kUndefinedLoss);
  EXPECT_CODE(cross_entropy(half, mask(2, 2, {0, 1, 2, 0})), ErrorCode::kInvalidInput);
  EXPECT_CODE(cross_entropy(half, Tensor<double>({2, 3}, 0.0)), ErrorCode::kInvalidShape);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = make_prediction(tu::random_tensor<double>({2, 3, 3}, rng, -5, 5));
    Tensor<double> gt({3, 3}, 0.0);
    for (auto& v : gt.values()) v = double(rng() % 2);
    EXPECT_GT(cross_entropy(p, gt), 0.0);
  }
}

TEST(HardMask, ArgmaxWithBackgroundTies) {
  EXPECT_EQ(hard_mask(with_foreground({0.7, 0.7, 0.7, 0.7}, 2, 2)), (Tensor<double>({2, 2}, 1.0)));
  EXPECT_EQ(hard_mask(with_foreground({0.5, 0.5, 0.5, 0.5}, 2, 2)), Tensor<double>::zeros({2, 2}));

  std::mt19937_64 rng(6);
  auto logits = tu::random_tensor<double>({2, 6, 6}, rng, -3, 3);
  for (std::size_t i = 0; i < 36; i += 5) logits[36 + i] = logits[i];
  const auto got = hard_mask(make_prediction(logits));
  for (std::size_t i = 0; i < 36; ++i) EXPECT_EQ(got[i], logits[36 + i] > logits[i] ? 1.0 : 0.0) << i;

  // Any order-preserving per-pixel rescaling keeps the mask.
  auto scaled = logits;
  for (std::size_t i = 0; i < 36; ++i) {
    const double a = 0.5 + double(i) / 10, b = double(i % 7) - 3;
    scaled[i] = a * logits[i] + b;
    scaled[36 + i] = a * logits[36 + i] + b;
  }
  EXPECT_EQ(hard_mask(make_prediction(scaled)), got);
}

TEST(KShotVote, SingleShotIsIdentity) {
  const auto m = mask(2, 3, {1, 0, 1, 1, 0, 0});
  EXPECT_EQ(kshot_vote<double>({m}), m);
  EXPECT_EQ(kshot_vote<double>({Tensor<double>::zeros({2, 3})}), Tensor<double>::zeros({2, 3}));
}

TEST(KShotVote, AgreementIsIdentity) {
  const auto m = mask(2, 3, {0, 1, 1, 0, 1, 0});
  EXPECT_EQ(kshot_vote<double>({m, m, m, m, m}), m);
}

TEST(KShotVote, FourPixelExample) {
  const auto a = mask(1, 4, {1, 1, 1, 0});
  const auto b = mask(1, 4, {1, 1, 0, 0});
  const auto c = mask(1, 4, {1, 0, 0, 0});
  EXPECT_EQ(kshot_vote<double>({a, b, c}), mask(1, 4, {1, 1, 0, 0}));
}

TEST(KShotVote, PermutationInvariant) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor<double>> masks;
    for (int k = 0; k < 5; ++k) {
      Tensor<double> m({4, 4}, 0.0);
      for (auto& v : m.values()) v = double(rng() % 2);
      masks.push_back(m);
    }
    const auto ref = kshot_vote(masks);
    for (int s = 0; s < 5; ++s) {
      std::shuffle(masks.begin(), masks.end(), rng);
      EXPECT_EQ(kshot_vote(masks), ref);
    }
  }
}

TEST(KShotVote, MaxNormalizationAndThreshold) {
  // Largest vote is 2 of K=4: pixels with 2 votes normalize to 1, 1 vote to 0.5.
  const auto a = mask(1, 3, {1, 1, 0});
  const auto b = mask(1, 3, {1, 0, 0});
  const auto z = Tensor<double>::zeros({1, 3});
  EXPECT_EQ(kshot_vote<double>({a, b, z, z}), mask(1, 3, {1, 0, 0}));
  EXPECT_EQ(kshot_vote<double>({a, b, z, z}, VoteConfig{0.4}), mask(1, 3, {1, 1, 0}));
}

TEST(KShotVote, Errors) {
  EXPECT_CODE(kshot_vote<double>({}), ErrorCode::kInvalidInput);
  EXPECT_CODE(kshot_vote<double>({mask(1, 2, {0, 0.5})}), ErrorCode::kInvalidInput);
  EXPECT_CODE(kshot_vote<double>({mask(1, 2, {0, 1}), mask(2, 1, {0, 1})}), ErrorCode::kInvalidShape);
  EXPECT_CODE(kshot_vote<double>({mask(1, 2, {0, 1})}, VoteConfig{1.0}), ErrorCode::kInvalidSpec);
  EXPECT_CODE(kshot_vote<double>({mask(1, 2, {0, 1})}, VoteConfig{0.0}), ErrorCode::kInvalidSpec);
}
