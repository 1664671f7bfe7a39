// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "hsnet/encoder.hpp"
#include "hsnet/grad_check.hpp"
#include "hsnet/ops.hpp"
#include "test_util.hpp"

using namespace hsnet;

namespace {

constexpr double kEps = 1e-6;
constexpr double kTol = 1e-4;

// <out, r> for a fixed random r, so no gradient cancels by symmetry.
Var project(Tape<double>& tape, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(tape, ad::mul(tape, out, tape.constant(tu::random_tensor<double>(tape.value(out).dims(), rng))));
}

Conv4dConfig cfg4(std::size_t in, std::size_t out, Stride4 s, Conv4dVariant v) {
  Conv4dConfig c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel = 3;
  c.stride = s;
  c.variant = v;
  return c;
}

}  // namespace

TEST(Tape, SharedInputsAccumulate) {
  Tape<double> tape;
  Var x = tape.variable(Tensor<double>({3}, std::vector<double>{1, -2, 3}));
  Var y = ad::sum(tape, ad::mul(tape, x, x));
  EXPECT_EQ(tape.value(y)[0], 14.0);
  tape.backward(y);
  EXPECT_EQ(tape.grad(x), (Tensor<double>({3}, std::vector<double>{2, -4, 6})));
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tape<double> tape;
  Var c = tape.constant(Tensor<double>({2}, 1.0));
  Var x = tape.variable(Tensor<double>({2}, 2.0));
  Var y = ad::sum(tape, ad::mul(tape, ad::scale(tape, c, 3.0), x));
  EXPECT_FALSE(tape.requires_grad(c));
  EXPECT_FALSE(tape.requires_grad(Var{2}));  // scale of a constant
  tape.backward(y);
  EXPECT_EQ(tape.grad(c), Tensor<double>::zeros({2}));
  EXPECT_EQ(tape.grad(x), (Tensor<double>({2}, 3.0)));
}

TEST(Tape, SecondBackwardNeedsReset) {
  Tape<double> tape;
  Var y = ad::sum(tape, tape.variable(Tensor<double>({2}, 1.0)));
  tape.backward(y);
  EXPECT_CODE(tape.backward(y), ErrorCode::kTapeConsumed);
  EXPECT_CODE(tape.variable(Tensor<double>({1})), ErrorCode::kTapeConsumed);
  tape.reset();
  EXPECT_EQ(tape.size(), 0u);
  Var z = ad::sum(tape, tape.variable(Tensor<double>({2}, 1.0)));
  EXPECT_NO_THROW(tape.backward(z));
}

TEST(Tape, NonScalarLossRejected) {
  Tape<double> tape;
  Var x = tape.variable(Tensor<double>({2}, 1.0));
  EXPECT_CODE(tape.backward(x), ErrorCode::kNonScalarLoss);
}

TEST(Tape, ParameterGradientsAccumulateUntilZeroed) {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>({2}, std::vector<double>{1, 2}));
  EXPECT_CODE(params.add("w", Tensor<double>({1})), ErrorCode::kInvalidSpec);
  Tape<double> tape;
  for (int pass = 0; pass < 2; ++pass) {
    tape.reset();
    Var y = ad::sum(tape, ad::scale(tape, tape.parameter(w), 5.0));
    tape.backward(y);
  }
  EXPECT_EQ(w.grad, (Tensor<double>({2}, 10.0)));
  params.zero_grad();
  EXPECT_EQ(w.grad, Tensor<double>::zeros({2}));

  tape.reset();
  tape.set_no_grad(true);
  Var y = ad::sum(tape, tape.parameter(w));
  EXPECT_FALSE(tape.requires_grad(y));
  tape.backward(y);
  EXPECT_EQ(w.grad, Tensor<double>::zeros({2}));
}

TEST(CrossEntropyOp, KnownValues) {
  Tape<double> tape;
  Var uniform = tape.constant(Tensor<double>({2, 1, 2}, 0.0));
  Tensor<double> labels({1, 2}, std::vector<double>{0, 1});
  EXPECT_NEAR(tape.value(ad::cross_entropy(tape, uniform, labels))[0], std::log(2.0), 1e-15);
  Tensor<double> half({1, 2}, std::vector<double>{1, 255});
  EXPECT_NEAR(tape.value(ad::cross_entropy(tape, uniform, half))[0], std::log(2.0), 1e-15);
  EXPECT_CODE(ad::cross_entropy(tape, uniform, Tensor<double>({1, 2}, 255.0)), ErrorCode::kUndefinedLoss);
  EXPECT_CODE(ad::cross_entropy(tape, uniform, Tensor<double>({1, 2}, 2.0)), ErrorCode::kInvalidInput);
  EXPECT_CODE(ad::cross_entropy(tape, uniform, Tensor<double>({2, 2}, 0.0)), ErrorCode::kInvalidShape);
}

TEST(GradCheck, ElementwiseAndPooling) {
  std::mt19937_64 rng(1);
  const auto x = tu::random_tensor<double>({2, 3, 3, 2, 2}, rng, 0.1, 1.0);
  EXPECT_LT(grad_check([](Tape<double>& t, Var v) { return project(t, ad::avg_pool_support_dims(t, v), 1); }, x, kEps)
                .max_rel_error,
            kTol);
  auto mixed = tu::random_tensor<double>({4, 5}, rng);
  for (auto& v : mixed.values()) v = v < 0 ? v - 0.1 : v + 0.1;  // away from the kink
  EXPECT_LT(grad_check([](Tape<double>& t, Var v) { return project(t, ad::relu(t, v), 2); }, mixed, kEps).max_rel_error,
            kTol);
  EXPECT_LT(grad_check(
                [](Tape<double>& t, Var v) {
                  return project(t, ad::add(t, ad::scale(t, v, -1.5), ad::mul(t, v, v)), 3);
                },
                mixed, kEps)
                .max_rel_error,
            kTol);
}

TEST(GradCheck, BilinearResize) {
  std::mt19937_64 rng(2);
  const auto x = tu::random_tensor<double>({2, 4, 5, 2, 2}, rng);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{7, 9}, {8, 10}, {2, 3}}) {
    const auto r = grad_check(
        [h = h, w = w](Tape<double>& t, Var v) { return project(t, ad::bilinear_resize(t, v, h, w), 4); }, x, kEps);
    EXPECT_LT(r.max_rel_error, kTol);
    EXPECT_EQ(r.checked, x.size());
  }
}

TEST(GradCheck, SoftmaxAndCrossEntropy) {
  std::mt19937_64 rng(3);
  const auto logits = tu::random_tensor<double>({2, 4, 4}, rng, -3, 3);
  EXPECT_LT(grad_check([](Tape<double>& t, Var v) { return project(t, ad::softmax_channel(t, v), 5); }, logits, kEps)
                .max_rel_error,
            kTol);
  Tensor<double> labels({4, 4}, 0.0);
  for (std::size_t i = 0; i < 16; ++i) labels[i] = i % 3 == 0 ? 1.0 : (i % 5 == 0 ? 255.0 : 0.0);
  EXPECT_LT(grad_check([&](Tape<double>& t, Var v) { return ad::cross_entropy(t, v, labels); }, logits, kEps)
                .max_rel_error,
            kTol);
}

TEST(GradCheck, GroupNorm) {
  std::mt19937_64 rng(4);
  ParameterSet<double> params;
  auto& gamma = params.add("g", tu::random_tensor<double>({8}, rng, 0.5, 1.5));
  auto& beta = params.add("b", tu::random_tensor<double>({8}, rng));
  const auto x = tu::random_tensor<double>({8, 3, 3, 2, 2}, rng, -2, 2);
  auto f = [&](Tape<double>& t, Var v) {
    return project(t, ad::group_norm(t, v, t.parameter(gamma), t.parameter(beta), 4), 6);
  };
  EXPECT_LT(grad_check(f, x, kEps).max_rel_error, kTol);
  auto loss = [&](Tape<double>& t) { return f(t, t.constant(x)); };
  EXPECT_LT(grad_check_parameter(loss, gamma, kEps).max_rel_error, kTol);
  EXPECT_LT(grad_check_parameter(loss, beta, kEps).max_rel_error, kTol);
}

TEST(GradCheck, Correlation) {
  std::mt19937_64 rng(5);
  // Shared component keeps most cosines positive, away from the clamp.
  auto q = tu::random_tensor<double>({6, 3, 3}, rng);
  auto s = tu::random_tensor<double>({6, 3, 3}, rng);
  for (std::size_t i = 0; i < 9; ++i) {
    q[i] += 2.0;
    s[i] += 2.0;
  }
  ParameterSet<double> params;
  auto& sp = params.add("support", s);
  auto f = [&](Tape<double>& t, Var v) { return project(t, ad::correlation_4d(t, v, t.parameter(sp)), 7); };
  EXPECT_LT(grad_check(f, q, kEps).max_rel_error, kTol);
  EXPECT_LT(grad_check_parameter([&](Tape<double>& t) { return f(t, t.constant(q)); }, sp, kEps).max_rel_error, kTol);
}

TEST(GradCheck, DecoderConv2d) {
  std::mt19937_64 rng(6);
  ParameterSet<double> params;
  auto& w = params.add("w", tu::random_tensor<double>({3, 4, 3, 3}, rng));
  auto& b = params.add("b", tu::random_tensor<double>({3}, rng));
  const auto x = tu::random_tensor<double>({4, 6, 6}, rng);
  auto f = [&](Tape<double>& t, Var v) {
    return project(t, ad::conv2d(t, v, t.parameter(w), t.parameter(b)), 8);
  };
  EXPECT_LT(grad_check(f, x, kEps).max_rel_error, kTol);
  auto loss = [&](Tape<double>& t) { return f(t, t.constant(x)); };
  EXPECT_LT(grad_check_parameter(loss, w, kEps).max_rel_error, kTol);
  EXPECT_LT(grad_check_parameter(loss, b, kEps).max_rel_error, kTol);
}

TEST(GradCheck, Conv4dAllVariants) {
  for (auto variant : {Conv4dVariant::kCenterPivot, Conv4dVariant::kOriginal, Conv4dVariant::kSeparable}) {
    for (Stride4 s : {Stride4{1, 1, 1, 1}, Stride4{1, 1, 2, 2}, Stride4{2, 2, 1, 1}}) {
      std::mt19937_64 rng(7);
      const auto cfg = cfg4(2, 3, s, variant);
      auto zeros = Kernel4d<double>::zeros(cfg);
      ParameterSet<double> params;
      ad::Kernel4dVars vars;
      std::vector<Parameter<double>*> ps;
      const std::pair<Tensor<double> Kernel4d<double>::*, std::optional<Var> ad::Kernel4dVars::*> members[] = {
          {&Kernel4d<double>::weight, &ad::Kernel4dVars::weight},
          {&Kernel4d<double>::bias, &ad::Kernel4dVars::bias},
          {&Kernel4d<double>::support_weight, &ad::Kernel4dVars::support_weight},
          {&Kernel4d<double>::support_bias, &ad::Kernel4dVars::support_bias},
          {&Kernel4d<double>::query_weight, &ad::Kernel4dVars::query_weight},
          {&Kernel4d<double>::query_bias, &ad::Kernel4dVars::query_bias},
          {&Kernel4d<double>::norm_scale, &ad::Kernel4dVars::norm_scale},
          {&Kernel4d<double>::norm_shift, &ad::Kernel4dVars::norm_shift}};
      std::vector<std::optional<Var> ad::Kernel4dVars::*> slots;
      for (const auto& [km, vm] : members) {
        if ((zeros.*km).empty()) continue;
        ps.push_back(&params.add(std::to_string(ps.size()), tu::random_tensor<double>((zeros.*km).dims(), rng)));
        slots.push_back(vm);
      }
      const auto x = tu::random_tensor<double>({2, 4, 4, 5, 4}, rng);
      auto f = [&](Tape<double>& t, Var v) {
        ad::Kernel4dVars kv;
        for (std::size_t i = 0; i < ps.size(); ++i) kv.*slots[i] = t.parameter(*ps[i]);
        return project(t, ad::conv4d(t, v, kv, cfg), 9);
      };
      EXPECT_LT(grad_check(f, x, kEps).max_rel_error, kTol) << to_string(variant);
      for (auto* p : ps) {
        EXPECT_LT(grad_check_parameter([&](Tape<double>& t) { return f(t, t.constant(x)); }, *p, kEps, 60, 1)
                      .max_rel_error,
                  kTol)
            << to_string(variant) << " " << p->id;
      }
    }
  }
}

// Whole encoder (three squeeze blocks, two mix blocks, pooling) at tiny
// spatial scale with the full 16 -> 64 -> 128 channel schedule.
TEST(GradCheck, EncoderEndToEnd) {
  Architecture arch = make_architecture(Backbone::kToy);
  arch.backbone.levels = {{{2, 8, 8}, {2, 8, 6}, {1, 8, 4}}};
  const std::array<std::array<std::size_t, 3>, 3> strides = {{{2, 2, 1}, {2, 2, 1}, {2, 1, 1}}};
  for (std::size_t p = 0; p < 3; ++p) {
    arch.squeeze[p].in_channels = arch.backbone.levels[p].layers;
    for (std::size_t s = 0; s < 3; ++s) {
      arch.squeeze[p].layers[s] = {std::array<std::size_t, 3>{16, 64, 128}[s], 3, strides[p][s]};
    }
  }
  for (auto& m : arch.mix) {
    m.in_channels = 128;
    for (auto& l : m.layers) l = {128, 3, 1};
  }
  arch.decoder.in_channels = 128;
  ASSERT_NO_THROW(arch.validate());

  std::mt19937_64 rng(10);
  ParameterSet<double> params;
  Encoder<double> enc(arch, params, rng);
  std::array<Tensor<double>, 3> pyr;
  for (std::size_t p = 0; p < 3; ++p) {
    const auto n = arch.backbone.levels[p].size;
    pyr[p] = tu::random_tensor<double>({arch.backbone.levels[p].layers, n, n, n, n}, rng, 0.0, 1.0);
  }
  auto run = [&](Tape<double>& t, Var level1) {
    std::array<Var, 3> c = {level1, t.constant(pyr[1]), t.constant(pyr[2])};
    Var z = enc.encode(t, c);
    EXPECT_EQ(t.value(z).dims(), (Shape{128, 8, 8}));
    return project(t, z, 11);
  };
  EXPECT_LT(grad_check(run, pyr[0], kEps, 8, 2).max_rel_error, kTol);
  auto loss = [&](Tape<double>& t) { return run(t, t.constant(pyr[0])); };
  for (const char* id : {"sqz1.0.support_weight", "sqz3.2.query_bias", "sqz2.1.gn_gamma", "mix2.0.query_weight",
                         "mix1.2.gn_beta"}) {
    EXPECT_LT(grad_check_parameter(loss, params.at(id), kEps, 4, 3).max_rel_error, kTol) << id;
  }
}
