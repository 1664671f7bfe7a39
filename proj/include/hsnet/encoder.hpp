// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hsnet/architecture.hpp"
#include "hsnet/ops.hpp"
#include "hsnet/tape.hpp"

namespace hsnet {

// (name, shape) of every intermediate tensor, in execution order.
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

// One (4D conv, group norm, ReLU) stage bound to its parameters.
template <typename T>
struct ConvStage {
  Conv4dConfig cfg;
  std::size_t groups = 4;
  std::array<Parameter<T>*, 8> kernel{};  // Kernel4d member order; nullptr when unused
  Parameter<T>* gamma = nullptr;
  Parameter<T>* beta = nullptr;
};

template <typename T>
using Block = std::array<ConvStage<T>, 3>;

// Registers the parameters of one block as "<prefix>.<stage>.<member>".
// Weights are drawn from N(0, 2 / fan_in), biases and shifts start at 0,
// scales at 1.
template <typename T>
Block<T> make_block(const BlockConfig& cfg, const std::string& prefix, ParameterSet<T>& params,
                    std::mt19937_64& rng);

template <typename T>
Var run_block(Tape<T>& tape, const Block<T>& block, Var x);

template <typename T>
class Encoder {
 public:
  Encoder(const Architecture& arch, ParameterSet<T>& params, std::mt19937_64& rng);

  // level is 1-based; input (|L_p|, H_p, W_p, H_p, W_p).
  Var squeeze_block(Tape<T>& tape, std::size_t level, Var c) const;
  // squeezed[p - 1] holds C_p^sqz.
  Var mix_blocks(Tape<T>& tape, const std::array<Var, 3>& squeezed, ShapeTrace* trace = nullptr) const;
  // Returns Z (C, H_1, W_1).
  Var encode(Tape<T>& tape, const std::array<Var, 3>& pyramid, ShapeTrace* trace = nullptr) const;

 private:
  std::array<Block<T>, 3> squeeze_;
  std::array<Block<T>, 2> mix_;
  std::array<std::size_t, 3> in_channels_{};
};

}  // namespace hsnet
