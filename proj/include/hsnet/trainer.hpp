// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "hsnet/model.hpp"

namespace hsnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig cfg;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m, v;  // one per parameter, insertion order
};

template <typename T>
AdamState<T> make_adam_state(const ParameterSet<T>& params, const AdamConfig& cfg = {});

// Bias-corrected Adam update from each parameter's accumulated grad.
template <typename T>
void adam_step(ParameterSet<T>& params, AdamState<T>& state);

struct TrainConfig {
  std::size_t batch = 1;        // episodes per step, loss is their mean
  std::size_t max_steps = 500;
  std::uint64_t seed = 0;
  double stop_loss = 0.0;       // stop once a step's loss falls below; 0 disables
  AdamConfig adam;
};

// Produces the episode for (step, slot in batch). Training uses the first
// support entry of each episode.
template <typename T>
using EpisodeSource = std::function<Episode<T>(std::size_t step, std::size_t slot)>;

struct TrainResult {
  std::vector<double> losses;  // one per completed step
};

template <typename T>
TrainResult train_episodes(HsNet<T>& model, const EpisodeSource<T>& source, const TrainConfig& cfg,
                           AdamState<T>* state = nullptr);

// Directory of HSTN files, one per parameter and moment, plus manifest.txt.
template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const ParameterSet<T>& params, const AdamState<T>& state);
template <typename T>
void load_checkpoint(const std::filesystem::path& dir, ParameterSet<T>& params, AdamState<T>& state);

}  // namespace hsnet
