// SPDX-License-Identifier: Apache-2.0
// OpenMP kernels against their serial references, and the three 4D kernel
// variants at one encoder-like layer. FLOP rates use the accounting counter.

#include <benchmark/benchmark.h>

#include <random>

#include "hsnet/accounting.hpp"
#include "hsnet/conv4d.hpp"
#include "hsnet/correlation.hpp"
#include "hsnet/layers.hpp"
#include "hsnet/reference.hpp"

namespace {

using namespace hsnet;

Tensor<float> random(const Shape& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  Tensor<float> t(dims);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

struct Layer {
  Conv4dConfig cfg;
  Tensor<float> x;
  Kernel4d<float> k;
};

// Arguments: channels, spatial extent, support stride.
Layer make_layer(const benchmark::State& state, Conv4dVariant v) {
  Layer l;
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto s = static_cast<std::size_t>(state.range(2));
  l.cfg.in_channels = c;
  l.cfg.out_channels = c;
  l.cfg.variant = v;
  l.cfg.stride = {1, 1, s, s};
  l.x = random({c, n, n, n, n}, 1);
  l.k = Kernel4d<float>::zeros(l.cfg);
  std::uint64_t seed = 2;
  for (auto* t : {&l.k.weight, &l.k.bias, &l.k.support_weight, &l.k.support_bias, &l.k.query_weight, &l.k.query_bias,
                  &l.k.norm_scale, &l.k.norm_shift}) {
    if (!t->empty()) *t = random(t->dims(), seed++);
  }
  return l;
}

void report(benchmark::State& state, const Layer& l) {
  state.counters["FLOPs"] = benchmark::Counter(double(conv4d_flops(l.cfg, l.x.dims())),
                                               benchmark::Counter::kIsIterationInvariantRate);
}

void BM_CenterPivot(benchmark::State& state) {
  const auto l = make_layer(state, Conv4dVariant::kCenterPivot);
  for (auto _ : state) benchmark::DoNotOptimize(conv4d_center_pivot(l.x, l.k, l.cfg));
  report(state, l);
}

void BM_CenterPivotSerial(benchmark::State& state) {
  const auto l = make_layer(state, Conv4dVariant::kCenterPivot);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv4d_center_pivot(l.x, l.k, l.cfg));
  report(state, l);
}

void BM_Separable(benchmark::State& state) {
  const auto l = make_layer(state, Conv4dVariant::kSeparable);
  for (auto _ : state) benchmark::DoNotOptimize(conv4d_separable(l.x, l.k, l.cfg));
  report(state, l);
}

void BM_Original(benchmark::State& state) {
  const auto l = make_layer(state, Conv4dVariant::kOriginal);
  for (auto _ : state) benchmark::DoNotOptimize(conv4d_original(l.x, l.k, l.cfg));
  report(state, l);
}

// Arguments: channels, spatial extent.
void BM_Correlation(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0)), n = static_cast<std::size_t>(state.range(1));
  const auto q = random({c, n, n}, 3), s = random({c, n, n}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(correlation_4d(q, s));
}

void BM_CorrelationSerial(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0)), n = static_cast<std::size_t>(state.range(1));
  const auto q = random({c, n, n}, 3), s = random({c, n, n}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(reference::correlation_4d(q, s));
}

void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0)), n = static_cast<std::size_t>(state.range(1));
  const auto x = random({c, n, n}, 5), w = random({c, c, 3, 3}, 6), b = random({c}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b));
}

void BM_Conv2dSerial(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0)), n = static_cast<std::size_t>(state.range(1));
  const auto x = random({c, n, n}, 5), w = random({c, c, 3, 3}, 6), b = random({c}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d(x, w, b));
}

}  // namespace

BENCHMARK(BM_CenterPivot)->Args({16, 8, 1})->Args({32, 10, 2})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CenterPivotSerial)->Args({16, 8, 1})->Args({32, 10, 2})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Separable)->Args({16, 8, 1})->Args({32, 10, 2})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Original)->Args({16, 8, 1})->Args({32, 10, 2})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Correlation)->Args({256, 25})->Args({1024, 13})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CorrelationSerial)->Args({256, 25})->Args({1024, 13})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2d)->Args({64, 50})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dSerial)->Args({64, 50})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
