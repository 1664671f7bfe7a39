// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "hsnet/manifest.hpp"
#include "hsnet/metrics.hpp"

namespace hsnet {

struct ManifestEvalOptions {
  IgnorePolicy policy = IgnorePolicy::kExclude;
  VoteConfig vote;
};

struct ManifestEvalResult {
  EvalAccumulator accumulator;
  std::size_t from_files = 0;  // episodes scored from their prediction= mask
  std::size_t from_model = 0;  // episodes predicted by the model
};

// Scores every episode against its query mask. Episodes carrying a
// prediction file use it; the rest need a model with the manifest's backbone.
template <typename T>
ManifestEvalResult evaluate_manifest(const EpisodeManifest& manifest, const HsNet<T>* model,
                                     const ManifestEvalOptions& options = {});

}  // namespace hsnet
