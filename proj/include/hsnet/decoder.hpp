// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

#include "hsnet/architecture.hpp"
#include "hsnet/encoder.hpp"
#include "hsnet/tape.hpp"

namespace hsnet {

template <typename T>
class Decoder {
 public:
  Decoder(const DecoderConfig& cfg, ParameterSet<T>& params, std::mt19937_64& rng);

  // Z (C, H_1, W_1) -> logits (classes, out_h, out_w).
  Var logits(Tape<T>& tape, Var z, std::size_t out_h, std::size_t out_w, ShapeTrace* trace = nullptr) const;

 private:
  struct Conv {
    Parameter<T>* weight = nullptr;
    Parameter<T>* bias = nullptr;
  };
  DecoderConfig cfg_;
  std::array<Conv, 4> convs_;
};

// Channel 0 is background, channel 1 foreground.
template <typename T>
struct Prediction {
  Tensor<T> logits;         // (2, H, W)
  Tensor<T> probabilities;  // softmax over channels
};

template <typename T>
Prediction<T> make_prediction(Tensor<T> logits);

// Mean over non-ignored pixels of -log p(gt); gt (H, W) in {0, 1, 255}.
template <typename T>
double cross_entropy(const Prediction<T>& pred, const Tensor<T>& gt);

// Per-pixel argmax; an exact tie goes to background.
template <typename T>
Tensor<T> hard_mask(const Prediction<T>& pred);

struct VoteConfig {
  double threshold = 0.5;
  void validate() const;
};

// Sums K binary masks, divides by the largest vote and keeps pixels above
// the threshold. No votes anywhere gives an all-background mask.
template <typename T>
Tensor<T> kshot_vote(const std::vector<Tensor<T>>& masks, const VoteConfig& cfg = {});

}  // namespace hsnet
