// SPDX-License-Identifier: Apache-2.0
#include "hsnet/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>

#include "hsnet/conv4d.hpp"
#include "hsnet/decoder.hpp"
#include "hsnet/encoder.hpp"
#include "hsnet/grad_check.hpp"
#include "hsnet/ops.hpp"

namespace hsnet {
namespace {

template <typename T>
Tensor<T> uniform(const Shape& dims, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<T> t(dims);
  for (auto& v : t.values()) v = static_cast<T>(d(rng));
  return t;
}

template <typename From, typename To>
Tensor<To> cast(const Tensor<From>& t) {
  if (t.empty()) return {};
  Tensor<To> out(t.dims());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return out;
}

template <typename From, typename To>
Kernel4d<To> cast(const Kernel4d<From>& k) {
  Kernel4d<To> out;
  out.variant = k.variant;
  out.weight = cast<From, To>(k.weight);
  out.bias = cast<From, To>(k.bias);
  out.support_weight = cast<From, To>(k.support_weight);
  out.support_bias = cast<From, To>(k.support_bias);
  out.query_weight = cast<From, To>(k.query_weight);
  out.query_bias = cast<From, To>(k.query_bias);
  out.norm_scale = cast<From, To>(k.norm_scale);
  out.norm_shift = cast<From, To>(k.norm_shift);
  return out;
}

template <typename T>
double deviation(const Tensor<T>& a, const Tensor<double>& b) {
  if (a.dims() != b.dims()) throw Error(ErrorCode::kInvalidShape, "decomposition check: shape mismatch");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
  return m;
}

}  // namespace

DecompositionCheck verify_decomposition(std::size_t trials, std::uint64_t seed, std::size_t max_extent) {
  if (trials == 0 || max_extent < 1) throw Error(ErrorCode::kInvalidSpec, "need at least one trial and extent >= 1");
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  DecompositionCheck r;
  for (std::size_t t = 0; t < trials; ++t) {
    Conv4dConfig cfg;
    cfg.in_channels = pick(1, 2);
    cfg.out_channels = pick(1, 2);
    cfg.kernel = 3;
    cfg.stride = {pick(1, 2), pick(1, 2), pick(1, 2), pick(1, 2)};
    const Shape dims = {cfg.in_channels, pick(1, max_extent), pick(1, max_extent), pick(1, max_extent),
                        pick(1, max_extent)};
    // Draw in float so both precisions see identical values. Inputs lie in
    // the correlation range [0, 1]; weights follow the network's
    // initialization scale.
    const auto x32 = uniform<float>(dims, rng, 0.0, 1.0);
    auto k32 = Kernel4d<float>::zeros(cfg);
    const double bound = std::sqrt(6.0 / double(cfg.in_channels * 9));  // variance 2 / fan-in
    k32.support_weight = uniform<float>(k32.support_weight.dims(), rng, -bound, bound);
    k32.query_weight = uniform<float>(k32.query_weight.dims(), rng, -bound, bound);
    k32.support_bias = uniform<float>(k32.support_bias.dims(), rng);
    k32.query_bias = uniform<float>(k32.query_bias.dims(), rng);

    const auto x64 = cast<float, double>(x32);
    const auto k64 = cast<float, double>(k32);
    auto dense = cfg;
    dense.variant = Conv4dVariant::kOriginal;
    const auto oracle = conv4d_original(x64, center_pivot_as_dense(k64, cfg), dense);
    r.max_error_f64 = std::max(r.max_error_f64, deviation(conv4d_center_pivot(x64, k64, cfg), oracle));
    r.max_error_f32 = std::max(r.max_error_f32, deviation(conv4d_center_pivot(x32, k32, cfg), oracle));
    ++r.trials;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

Architecture tiny_encoder_architecture() {
  Architecture arch = make_architecture(Backbone::kToy);
  arch.backbone.levels = {{{2, 8, 8}, {2, 8, 6}, {1, 8, 4}}};
  const std::array<std::array<std::size_t, 3>, 3> strides = {{{2, 2, 1}, {2, 2, 1}, {2, 1, 1}}};
  const std::array<std::size_t, 3> channels = {16, 64, 128};
  for (std::size_t p = 0; p < 3; ++p) {
    arch.squeeze[p].in_channels = arch.backbone.levels[p].layers;
    for (std::size_t s = 0; s < 3; ++s) arch.squeeze[p].layers[s] = {channels[s], 3, strides[p][s]};
  }
  for (auto& m : arch.mix) {
    m.in_channels = 128;
    for (auto& l : m.layers) l = {128, 3, 1};
  }
  arch.decoder = {128, 16, 8, 2, 3};
  arch.validate();
  return arch;
}

namespace {

constexpr double kEps = 1e-6;

// <out, r> for a fixed random r.
Var project(Tape<double>& tape, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(tape, ad::mul(tape, out, tape.constant(uniform<double>(tape.value(out).dims(), rng))));
}

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed) {}

  void input(const std::string& name, const ScalarFn& f, const Tensor<double>& x, std::size_t samples = 0) {
    const auto r = grad_check(f, x, kEps, samples, rng_());
    out_.push_back({name, r.max_rel_error, r.checked});
  }
  void param(const std::string& name, const std::function<Var(Tape<double>&)>& loss, Parameter<double>& p,
             std::size_t samples = 0) {
    const auto r = grad_check_parameter(loss, p, kEps, samples, rng_());
    out_.push_back({name, r.max_rel_error, r.checked});
  }
  std::mt19937_64& rng() { return rng_; }
  std::vector<GradCheckEntry> take() { return std::move(out_); }

 private:
  std::mt19937_64 rng_;
  std::vector<GradCheckEntry> out_;
};

void check_conv4d(Suite& s, Conv4dVariant variant) {
  Conv4dConfig cfg;
  cfg.in_channels = 2;
  cfg.out_channels = 3;
  cfg.variant = variant;
  cfg.stride = {1, 1, 2, 2};
  const auto zeros = Kernel4d<double>::zeros(cfg);
  ParameterSet<double> params;
  struct Slot {
    const char* name;
    const Tensor<double>* shape;
    std::optional<Var> ad::Kernel4dVars::*member;
  };
  const Slot slots[] = {{"weight", &zeros.weight, &ad::Kernel4dVars::weight},
                        {"bias", &zeros.bias, &ad::Kernel4dVars::bias},
                        {"support_weight", &zeros.support_weight, &ad::Kernel4dVars::support_weight},
                        {"support_bias", &zeros.support_bias, &ad::Kernel4dVars::support_bias},
                        {"query_weight", &zeros.query_weight, &ad::Kernel4dVars::query_weight},
                        {"query_bias", &zeros.query_bias, &ad::Kernel4dVars::query_bias},
                        {"norm_scale", &zeros.norm_scale, &ad::Kernel4dVars::norm_scale},
                        {"norm_shift", &zeros.norm_shift, &ad::Kernel4dVars::norm_shift}};
  std::vector<std::pair<const Slot*, Parameter<double>*>> used;
  for (const auto& slot : slots) {
    if (slot.shape->empty()) continue;
    used.push_back({&slot, &params.add(slot.name, uniform<double>(slot.shape->dims(), s.rng()))});
  }
  const auto x = uniform<double>({2, 4, 4, 5, 4}, s.rng());
  auto f = [&](Tape<double>& t, Var v) {
    ad::Kernel4dVars kv;
    for (auto [slot, p] : used) kv.*(slot->member) = t.parameter(*p);
    return project(t, ad::conv4d(t, v, kv, cfg), 1);
  };
  const std::string base = "conv4d_" + std::string(to_string(variant));
  s.input(base + ".input", f, x);
  for (auto [slot, p] : used) {
    s.param(base + "." + slot->name, [&](Tape<double>& t) { return f(t, t.constant(x)); }, *p, 60);
  }
}

}  // namespace

std::vector<GradCheckEntry> run_gradient_checks(std::uint64_t seed, bool include_encoder) {
  Suite s(seed);
  for (auto v : {Conv4dVariant::kCenterPivot, Conv4dVariant::kOriginal, Conv4dVariant::kSeparable}) check_conv4d(s, v);

  {
    ParameterSet<double> params;
    auto& gamma = params.add("gamma", uniform<double>({8}, s.rng(), 0.5, 1.5));
    auto& beta = params.add("beta", uniform<double>({8}, s.rng()));
    const auto x = uniform<double>({8, 3, 3, 2, 2}, s.rng(), -2, 2);
    auto f = [&](Tape<double>& t, Var v) {
      return project(t, ad::group_norm(t, v, t.parameter(gamma), t.parameter(beta), 4), 2);
    };
    auto loss = [&](Tape<double>& t) { return f(t, t.constant(x)); };
    s.input("group_norm.input", f, x);
    s.param("group_norm.gamma", loss, gamma);
    s.param("group_norm.beta", loss, beta);
  }
  s.input(
      "bilinear_resize", [](Tape<double>& t, Var v) { return project(t, ad::bilinear_resize(t, v, 7, 9), 3); },
      uniform<double>({2, 4, 5, 2, 2}, s.rng()));
  {
    // A shared offset keeps cosines away from the clamp at zero.
    auto q = uniform<double>({6, 3, 3}, s.rng());
    auto sup = uniform<double>({6, 3, 3}, s.rng());
    for (std::size_t i = 0; i < 9; ++i) {
      q[i] += 2.0;
      sup[i] += 2.0;
    }
    ParameterSet<double> params;
    auto& sp = params.add("support", sup);
    auto f = [&](Tape<double>& t, Var v) { return project(t, ad::correlation_4d(t, v, t.parameter(sp)), 4); };
    s.input("correlation.query", f, q);
    s.param("correlation.support", [&](Tape<double>& t) { return f(t, t.constant(q)); }, sp);
  }
  {
    ParameterSet<double> params;
    auto& w = params.add("w", uniform<double>({3, 4, 3, 3}, s.rng()));
    auto& b = params.add("b", uniform<double>({3}, s.rng()));
    const auto x = uniform<double>({4, 6, 6}, s.rng());
    auto f = [&](Tape<double>& t, Var v) { return project(t, ad::conv2d(t, v, t.parameter(w), t.parameter(b)), 5); };
    auto loss = [&](Tape<double>& t) { return f(t, t.constant(x)); };
    s.input("conv2d.input", f, x);
    s.param("conv2d.weight", loss, w);
    s.param("conv2d.bias", loss, b);
  }
  {
    const auto logits = uniform<double>({2, 4, 4}, s.rng(), -3, 3);
    Tensor<double> labels({4, 4}, 0.0);
    for (std::size_t i = 0; i < 16; ++i) labels[i] = i % 3 == 0 ? 1.0 : (i % 5 == 0 ? ad::kIgnoreLabel : 0.0);
    s.input("softmax", [](Tape<double>& t, Var v) { return project(t, ad::softmax_channel(t, v), 6); }, logits);
    s.input("cross_entropy", [&](Tape<double>& t, Var v) { return ad::cross_entropy(t, v, labels); }, logits);
  }
  {
    auto x = uniform<double>({4, 5}, s.rng());
    for (auto& v : x.values()) v += v < 0 ? -0.1 : 0.1;  // away from the kink
    s.input("relu", [](Tape<double>& t, Var v) { return project(t, ad::relu(t, v), 7); }, x);
    s.input(
        "avg_pool_support",
        [](Tape<double>& t, Var v) { return project(t, ad::avg_pool_support_dims(t, v), 8); },
        uniform<double>({2, 3, 3, 2, 2}, s.rng()));
  }
  {
    ParameterSet<double> params;
    Decoder<double> dec(DecoderConfig{8, 8, 4, 2, 3}, params, s.rng());
    const auto z = uniform<double>({8, 6, 6}, s.rng());
    Tensor<double> gt({24, 24}, 0.0);
    for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = (i * 7) % 5 < 2 ? 1.0 : 0.0;
    auto f = [&](Tape<double>& t, Var v) { return ad::cross_entropy(t, dec.logits(t, v, 24, 24), gt); };
    s.input("decoder.input", f, z);
    for (auto& p : params) s.param("decoder." + p.id, [&](Tape<double>& t) { return f(t, t.constant(z)); }, p, 40);
  }
  if (include_encoder) {
    const auto arch = tiny_encoder_architecture();
    ParameterSet<double> params;
    Encoder<double> enc(arch, params, s.rng());
    std::array<Tensor<double>, 3> pyr;
    for (std::size_t p = 0; p < 3; ++p) {
      const auto n = arch.backbone.levels[p].size;
      pyr[p] = uniform<double>({arch.backbone.levels[p].layers, n, n, n, n}, s.rng(), 0.0, 1.0);
    }
    auto f = [&](Tape<double>& t, Var level1) {
      return project(t, enc.encode(t, {level1, t.constant(pyr[1]), t.constant(pyr[2])}), 9);
    };
    s.input("encoder.input", f, pyr[0], 8);
    for (const char* id : {"sqz1.0.support_weight", "sqz3.2.query_bias", "sqz2.1.gn_gamma", "mix2.0.query_weight",
                           "mix1.2.gn_beta"}) {
      s.param(std::string("encoder.") + id, [&](Tape<double>& t) { return f(t, t.constant(pyr[0])); }, params.at(id),
              4);
    }
  }
  return s.take();
}

}  // namespace hsnet
