// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "hsnet/synthetic.hpp"
#include "hsnet/trainer.hpp"

namespace hsnet {

struct OverfitConfig {
  SyntheticEpisodeSpec episode;
  std::uint64_t model_seed = 0;
  std::size_t max_steps = 500;
  double loss_target = 0.05;
  std::size_t eval_every = 5;
  AdamConfig adam;
  std::filesystem::path checkpoint;  // written when the run ends; empty skips
};

struct OverfitResult {
  std::vector<double> losses;  // training loss per step
  std::size_t steps = 0;       // steps taken when the run ended
  double loss = 0.0;           // cross-entropy at the last evaluation
  double miou = 0.0;           // episode mIoU at the last evaluation
  bool reached = false;        // loss < target and mIoU 1 at one evaluation
};

// Trains a fresh toy model on one synthetic episode until it is fitted or
// the step budget runs out. Evaluation uses the weights after each update.
template <typename T>
OverfitResult run_overfit(const OverfitConfig& cfg);

}  // namespace hsnet
