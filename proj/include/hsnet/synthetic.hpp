// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "hsnet/architecture.hpp"
#include "hsnet/model.hpp"

namespace hsnet {

// Episodes whose query and supports share one planted feature vector per
// layer under their foreground masks, on top of per-position random
// background vectors. Masks are unions of rectangles on the cell grid of the
// finest feature level, upsampled the way the decoder upsamples and
// thresholded at 0.5, which rounds their corners.
struct SyntheticEpisodeSpec {
  std::uint64_t seed = 0;
  Backbone backbone = Backbone::kToy;
  std::size_t shots = 1;
  std::size_t blobs = 2;
  std::size_t min_blob = 2;  // side length in cells
  std::size_t max_blob = 4;
  double noise = 0.1;         // stddev of additive noise relative to unit-variance features
  std::size_t ignore_band = 0;  // background query pixels this close to foreground become 255
  std::size_t class_id = 0;

  void validate() const;
};

template <typename T>
Episode<T> generate_synthetic_episode(const SyntheticEpisodeSpec& spec);

// Binary (S, S) mask built from the spec's blob rules.
template <typename T>
Tensor<T> synthetic_mask(std::size_t image, std::size_t cells, const SyntheticEpisodeSpec& spec, std::uint64_t seed);

}  // namespace hsnet
