// SPDX-License-Identifier: Apache-2.0
#include "hsnet/model.hpp"

#include <random>

namespace hsnet {

template <typename T>
HsNet<T>::HsNet(const Architecture& arch, std::uint64_t seed)
    : arch_(arch), params_(std::make_unique<ParameterSet<T>>()) {
  arch_.validate();
  std::mt19937_64 rng(seed);
  encoder_ = std::make_unique<Encoder<T>>(arch_, *params_, rng);
  decoder_ = std::make_unique<Decoder<T>>(arch_.decoder, *params_, rng);
}

template <typename T>
void HsNet<T>::check_features(const FeatureSet<T>& features, const char* what) const {
  features.validate();
  const auto expected = arch_.backbone.feature_shapes();
  if (features.features.size() != expected.size() || features.group_sizes != arch_.backbone.group_sizes()) {
    throw Error(ErrorCode::kInvalidShape, std::string(what) + ": expected " + std::to_string(expected.size()) +
                                              " layers for backbone " + std::string(to_string(arch_.backbone.tag)));
  }
  for (std::size_t l = 0; l < expected.size(); ++l) {
    if (features.features[l].dims() != expected[l]) {
      throw Error(ErrorCode::kInvalidShape, std::string(what) + " layer " + std::to_string(l) + ": expected " +
                                                shape_string(expected[l]) + ", got " +
                                                shape_string(features.features[l].dims()));
    }
  }
}

template <typename T>
Var HsNet<T>::forward(Tape<T>& tape, const FeatureSet<T>& query, const FeatureSet<T>& support,
                      const Tensor<T>& support_mask, ShapeTrace* trace, std::array<Var, 3>* pyramid) const {
  check_features(query, "query features");
  check_features(support, "support features");
  const auto masked = mask_support_features(support, support_mask);
  auto volumes = build_hypercorrelation_pyramid(query, masked);
  std::array<Var, 3> c{};
  for (std::size_t p = 3; p-- > 0;) {
    if (trace != nullptr) trace->emplace_back("C" + std::to_string(p + 1), volumes[p].tensor.dims());
    c[p] = tape.constant(std::move(volumes[p].tensor));
  }
  if (pyramid != nullptr) *pyramid = c;
  Var z = encoder_->encode(tape, c, trace);
  const std::size_t image = arch_.backbone.image_size;
  return decoder_->logits(tape, z, image, image, trace);
}

template <typename T>
Prediction<T> HsNet<T>::predict(const FeatureSet<T>& query, const FeatureSet<T>& support,
                                const Tensor<T>& support_mask) const {
  Tape<T> tape;
  tape.set_no_grad(true);
  Var logits = forward(tape, query, support, support_mask);
  return make_prediction(tape.value(logits));
}

template <typename T>
Tensor<T> HsNet<T>::predict_mask(const Episode<T>& episode, const VoteConfig& vote) const {
  if (episode.supports.empty()) throw Error(ErrorCode::kInvalidInput, "episode has no support entries");
  std::vector<Tensor<T>> masks;
  masks.reserve(episode.supports.size());
  for (const auto& s : episode.supports) masks.push_back(hard_mask(predict(episode.query, s.features, s.mask)));
  return kshot_vote(masks, vote);
}

template class HsNet<float>;
template class HsNet<double>;

}  // namespace hsnet
