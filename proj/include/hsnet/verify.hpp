// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hsnet/architecture.hpp"

namespace hsnet {

struct DecompositionCheck {
  std::size_t trials = 0;
  double max_error_f32 = 0;  // against the dense oracle evaluated in double
  double max_error_f64 = 0;
  double seconds = 0;
};

// Random shapes up to (2, max_extent^4), kernel 3, strides in {1, 2} per
// dimension: the center-pivot kernel against a dense 4D convolution whose
// kernel is zero off the two pivot planes.
DecompositionCheck verify_decomposition(std::size_t trials, std::uint64_t seed, std::size_t max_extent = 6);

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0;
  std::size_t checked = 0;
};

// Central-difference checks in double for every differentiable op and, when
// asked, a whole encoder at tiny scale.
std::vector<GradCheckEntry> run_gradient_checks(std::uint64_t seed, bool include_encoder);

// Full channel schedule with query extents 8/6/4, small enough for
// finite differences.
Architecture tiny_encoder_architecture();

}  // namespace hsnet
