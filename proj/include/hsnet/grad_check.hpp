// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "hsnet/tape.hpp"

namespace hsnet {

struct GradCheckResult {
  double max_rel_error = 0;  // max |analytic - central| / max(1, |central|)
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Builds a scalar loss on the tape from the leaf holding x.
using ScalarFn = std::function<Var(Tape<double>&, Var)>;

// Compares the tape gradient of f at x with central differences of step eps.
// samples == 0 checks every coordinate; otherwise a seeded random subset.
GradCheckResult grad_check(const ScalarFn& f, const Tensor<double>& x, double eps, std::size_t samples = 0,
                           std::uint64_t seed = 0);

// Same check for a parameter already wired into a loss; its value is
// perturbed in place and restored.
GradCheckResult grad_check_parameter(const std::function<Var(Tape<double>&)>& loss, Parameter<double>& param,
                                     double eps, std::size_t samples = 0, std::uint64_t seed = 0);

}  // namespace hsnet
