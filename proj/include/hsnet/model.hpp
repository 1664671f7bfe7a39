// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "hsnet/architecture.hpp"
#include "hsnet/correlation.hpp"
#include "hsnet/decoder.hpp"
#include "hsnet/encoder.hpp"

namespace hsnet {

template <typename T>
struct SupportEntry {
  FeatureSet<T> features;
  Tensor<T> mask;  // (H, W) at image resolution, values in [0, 1]
};

template <typename T>
struct Episode {
  std::size_t class_id = 0;
  FeatureSet<T> query;
  Tensor<T> query_mask;  // (H, W) in {0, 1, 255}
  std::vector<SupportEntry<T>> supports;
};

template <typename T>
class HsNet {
 public:
  explicit HsNet(const Architecture& arch, std::uint64_t seed = 0);

  const Architecture& architecture() const { return arch_; }
  ParameterSet<T>& parameters() { return *params_; }
  const ParameterSet<T>& parameters() const { return *params_; }
  const Encoder<T>& encoder() const { return *encoder_; }
  const Decoder<T>& decoder() const { return *decoder_; }

  // Features enter as constants: mask, correlate, encode, decode. Returns
  // logits (2, image, image).
  Var forward(Tape<T>& tape, const FeatureSet<T>& query, const FeatureSet<T>& support,
              const Tensor<T>& support_mask, ShapeTrace* trace = nullptr,
              std::array<Var, 3>* pyramid = nullptr) const;

  // Rejects feature sets that disagree with the backbone schedule.
  void check_features(const FeatureSet<T>& features, const char* what) const;

  Prediction<T> predict(const FeatureSet<T>& query, const FeatureSet<T>& support,
                        const Tensor<T>& support_mask) const;
  // One hard mask per shot, then voting.
  Tensor<T> predict_mask(const Episode<T>& episode, const VoteConfig& vote = {}) const;

 private:
  Architecture arch_;
  std::unique_ptr<ParameterSet<T>> params_;
  std::unique_ptr<Encoder<T>> encoder_;
  std::unique_ptr<Decoder<T>> decoder_;
};

}  // namespace hsnet
