// SPDX-License-Identifier: Apache-2.0
#include "hsnet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace hsnet {
namespace {

std::vector<std::size_t> pick_coordinates(std::size_t n, std::size_t samples, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (samples == 0 || samples >= n) return idx;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(samples);
  return idx;
}

// Central difference at one coordinate of `slot`, which eval() reads.
template <typename Eval>
double central_difference(Tensor<double>& slot, std::size_t i, double eps, Eval&& eval) {
  const double saved = slot[i];
  slot[i] = saved + eps;
  const double up = eval();
  slot[i] = saved - eps;
  const double down = eval();
  slot[i] = saved;
  return (up - down) / (2 * eps);
}

void record(GradCheckResult& r, std::size_t i, double analytic, double numeric) {
  const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
  if (err > r.max_rel_error || r.checked == 0) {
    r.max_rel_error = std::max(r.max_rel_error, err);
    r.worst_index = i;
  }
  ++r.checked;
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, const Tensor<double>& x, double eps, std::size_t samples,
                           std::uint64_t seed) {
  Tape<double> tape;
  const Var leaf = tape.variable(x);
  tape.backward(f(tape, leaf));
  const Tensor<double> analytic = tape.grad(leaf);

  Tensor<double> probe = x;
  auto eval = [&] {
    Tape<double> t;
    return t.value(f(t, t.constant(probe)))[0];
  };
  GradCheckResult result;
  for (auto i : pick_coordinates(x.size(), samples, seed)) {
    record(result, i, analytic[i], central_difference(probe, i, eps, eval));
  }
  return result;
}

GradCheckResult grad_check_parameter(const std::function<Var(Tape<double>&)>& loss, Parameter<double>& param,
                                     double eps, std::size_t samples, std::uint64_t seed) {
  param.zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }
  const Tensor<double> analytic = param.grad;
  auto eval = [&] {
    Tape<double> t;
    t.set_no_grad(true);
    return t.value(loss(t))[0];
  };
  GradCheckResult result;
  for (auto i : pick_coordinates(param.value.size(), samples, seed)) {
    record(result, i, analytic[i], central_difference(param.value, i, eps, eval));
  }
  return result;
}

}  // namespace hsnet
