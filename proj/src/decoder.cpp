// SPDX-License-Identifier: Apache-2.0
#include "hsnet/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "hsnet/ops.hpp"
#include "hsnet/tensor_ops.hpp"

namespace hsnet {

template <typename T>
Decoder<T>::Decoder(const DecoderConfig& cfg, ParameterSet<T>& params, std::mt19937_64& rng) : cfg_(cfg) {
  if (cfg.kernel % 2 == 0 || cfg.classes < 2) throw Error(ErrorCode::kInvalidSpec, "bad decoder config");
  const std::array<std::array<std::size_t, 2>, 4> io = {
      {{cfg.in_channels, cfg.mid1}, {cfg.mid1, cfg.mid2}, {cfg.mid2, cfg.mid2}, {cfg.mid2, cfg.classes}}};
  for (std::size_t i = 0; i < io.size(); ++i) {
    const auto [in, out] = io[i];
    const std::size_t fan_in = in * cfg.kernel * cfg.kernel;
    Tensor<T> w({out, in, cfg.kernel, cfg.kernel});
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : w.values()) v = static_cast<T>(dist(rng));
    const std::string base = "dec." + std::to_string(i) + ".";
    convs_[i].weight = &params.add(base + "weight", std::move(w));
    convs_[i].bias = &params.add(base + "bias", Tensor<T>({out}, T{0}));
  }
}

template <typename T>
Var Decoder<T>::logits(Tape<T>& tape, Var z, std::size_t out_h, std::size_t out_w, ShapeTrace* trace) const {
  const auto& dims = tape.value(z).dims();
  if (dims.size() != 3 || dims[0] != cfg_.in_channels) {
    throw Error(ErrorCode::kInvalidShape, "decoder expects (" + std::to_string(cfg_.in_channels) +
                                              ", H, W), got " + shape_string(dims));
  }
  auto conv = [&](std::size_t i, Var x) {
    return ad::conv2d(tape, x, tape.parameter(*convs_[i].weight), tape.parameter(*convs_[i].bias));
  };
  Var x = ad::relu(tape, conv(0, z));
  x = ad::relu(tape, conv(1, x));
  if (trace != nullptr) trace->emplace_back("decoder_stage1", tape.value(x).dims());
  x = ad::bilinear_resize(tape, x, dims[1] * 2, dims[2] * 2);
  if (trace != nullptr) trace->emplace_back("decoder_upsample", tape.value(x).dims());
  x = ad::relu(tape, conv(2, x));
  x = conv(3, x);
  if (trace != nullptr) trace->emplace_back("decoder_stage2", tape.value(x).dims());
  x = ad::bilinear_resize(tape, x, out_h, out_w);
  if (trace != nullptr) trace->emplace_back("M_hat", tape.value(x).dims());
  return x;
}

template <typename T>
Prediction<T> make_prediction(Tensor<T> logits) {
  require_rank(logits, 3, "prediction logits");
  if (logits.dim(0) != 2) throw Error(ErrorCode::kInvalidShape, "prediction needs two channels");
  Prediction<T> p;
  p.probabilities = softmax_channel(logits);
  p.logits = std::move(logits);
  return p;
}

template <typename T>
double cross_entropy(const Prediction<T>& pred, const Tensor<T>& gt) {
  const auto& l = pred.logits;
  require_rank(gt, 2, "ground truth");
  if (gt.dim(0) != l.dim(1) || gt.dim(1) != l.dim(2)) {
    throw Error(ErrorCode::kInvalidShape,
                "ground truth " + shape_string(gt.dims()) + " vs prediction " + shape_string(l.dims()));
  }
  const std::size_t plane = gt.size();
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < plane; ++i) {
    const double g = static_cast<double>(gt[i]);
    if (g == ad::kIgnoreLabel) continue;
    if (g != 0.0 && g != 1.0) throw Error(ErrorCode::kInvalidInput, "ground truth value must be 0, 1 or 255");
    const double a = l[i], b = l[plane + i];
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    total += lse - (g == 0.0 ? a : b);
    ++counted;
  }
  if (counted == 0) throw Error(ErrorCode::kUndefinedLoss, "every pixel is ignored");
  return total / static_cast<double>(counted);
}

template <typename T>
Tensor<T> hard_mask(const Prediction<T>& pred) {
  const auto& p = pred.probabilities;
  require_rank(p, 3, "prediction");
  const std::size_t h = p.dim(1), w = p.dim(2), plane = h * w;
  Tensor<T> out({h, w});
  for (std::size_t i = 0; i < plane; ++i) out[i] = p[plane + i] > p[i] ? T{1} : T{0};
  return out;
}

void VoteConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidSpec, "vote threshold must lie in (0, 1)");
  }
}

template <typename T>
Tensor<T> kshot_vote(const std::vector<Tensor<T>>& masks, const VoteConfig& cfg) {
  cfg.validate();
  if (masks.empty()) throw Error(ErrorCode::kInvalidInput, "kshot_vote needs at least one mask");
  require_rank(masks[0], 2, "vote mask");
  std::vector<double> votes(masks[0].size(), 0.0);
  for (const auto& m : masks) {
    require_same_shape(masks[0], m, "kshot_vote");
    for (std::size_t i = 0; i < votes.size(); ++i) {
      if (m[i] != T{0} && m[i] != T{1}) throw Error(ErrorCode::kInvalidInput, "vote masks must be binary");
      votes[i] += static_cast<double>(m[i]);
    }
  }
  Tensor<T> out(masks[0].dims(), T{0});
  const double top = *std::max_element(votes.begin(), votes.end());
  if (top == 0.0) return out;
  for (std::size_t i = 0; i < votes.size(); ++i) out[i] = votes[i] / top > cfg.threshold ? T{1} : T{0};
  return out;
}

template class Decoder<float>;
template class Decoder<double>;
template Prediction<float> make_prediction(Tensor<float>);
template Prediction<double> make_prediction(Tensor<double>);
template double cross_entropy(const Prediction<float>&, const Tensor<float>&);
template double cross_entropy(const Prediction<double>&, const Tensor<double>&);
template Tensor<float> hard_mask(const Prediction<float>&);
template Tensor<double> hard_mask(const Prediction<double>&);
template Tensor<float> kshot_vote(const std::vector<Tensor<float>>&, const VoteConfig&);
template Tensor<double> kshot_vote(const std::vector<Tensor<double>>&, const VoteConfig&);

}  // namespace hsnet
