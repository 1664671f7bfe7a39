// SPDX-License-Identifier: Apache-2.0
#include "hsnet/encoder.hpp"

#include <cmath>

namespace hsnet {
namespace {

template <typename T>
using Member = Tensor<T> Kernel4d<T>::*;

template <typename T>
constexpr std::array<Member<T>, 8> kMembers = {
    &Kernel4d<T>::weight,       &Kernel4d<T>::bias,         &Kernel4d<T>::support_weight,
    &Kernel4d<T>::support_bias, &Kernel4d<T>::query_weight, &Kernel4d<T>::query_bias,
    &Kernel4d<T>::norm_scale,   &Kernel4d<T>::norm_shift};

constexpr std::array<const char*, 8> kMemberNames = {"weight",       "bias",       "support_weight",
                                                     "support_bias", "query_weight", "query_bias",
                                                     "norm_scale",   "norm_shift"};

constexpr std::array<std::optional<Var> ad::Kernel4dVars::*, 8> kVarMembers = {
    &ad::Kernel4dVars::weight,       &ad::Kernel4dVars::bias,         &ad::Kernel4dVars::support_weight,
    &ad::Kernel4dVars::support_bias, &ad::Kernel4dVars::query_weight, &ad::Kernel4dVars::query_bias,
    &ad::Kernel4dVars::norm_scale,   &ad::Kernel4dVars::norm_shift};

bool is_weight(std::size_t m) { return m == 0 || m == 2 || m == 4; }

template <typename T>
Tensor<T> initial_value(std::size_t member, const Shape& dims, std::mt19937_64& rng) {
  if (member == 6) return Tensor<T>(dims, T{1});
  Tensor<T> t(dims, T{0});
  if (!is_weight(member)) return t;
  std::size_t fan_in = 1;
  for (std::size_t d = 1; d < dims.size(); ++d) fan_in *= dims[d];
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace

template <typename T>
Block<T> make_block(const BlockConfig& cfg, const std::string& prefix, ParameterSet<T>& params,
                    std::mt19937_64& rng) {
  Block<T> block;
  for (std::size_t s = 0; s < 3; ++s) {
    auto& stage = block[s];
    stage.cfg = cfg.conv_config(s);
    stage.cfg.validate();
    stage.groups = cfg.groups;
    if (stage.cfg.out_channels % cfg.groups != 0) {
      throw Error(ErrorCode::kInvalidSpec, prefix + ": channels not divisible by group count");
    }
    const std::string base = prefix + "." + std::to_string(s) + ".";
    const auto shapes = Kernel4d<T>::zeros(stage.cfg);
    for (std::size_t m = 0; m < kMembers<T>.size(); ++m) {
      const auto& t = shapes.*kMembers<T>[m];
      if (t.empty()) continue;
      stage.kernel[m] = &params.add(base + kMemberNames[m], initial_value<T>(m, t.dims(), rng));
    }
    stage.gamma = &params.add(base + "gn_gamma", Tensor<T>({stage.cfg.out_channels}, T{1}));
    stage.beta = &params.add(base + "gn_beta", Tensor<T>({stage.cfg.out_channels}, T{0}));
  }
  return block;
}

template <typename T>
Var run_block(Tape<T>& tape, const Block<T>& block, Var x) {
  for (const auto& stage : block) {
    ad::Kernel4dVars vars;
    for (std::size_t m = 0; m < kVarMembers.size(); ++m) {
      if (stage.kernel[m] != nullptr) vars.*kVarMembers[m] = tape.parameter(*stage.kernel[m]);
    }
    x = ad::conv4d(tape, x, vars, stage.cfg);
    x = ad::group_norm(tape, x, tape.parameter(*stage.gamma), tape.parameter(*stage.beta), stage.groups);
    x = ad::relu(tape, x);
  }
  return x;
}

template <typename T>
Encoder<T>::Encoder(const Architecture& arch, ParameterSet<T>& params, std::mt19937_64& rng) {
  arch.validate();
  for (std::size_t p = 0; p < 3; ++p) {
    squeeze_[p] = make_block<T>(arch.squeeze[p], "sqz" + std::to_string(p + 1), params, rng);
    in_channels_[p] = arch.squeeze[p].in_channels;
  }
  for (std::size_t p = 0; p < 2; ++p) {
    mix_[p] = make_block<T>(arch.mix[p], "mix" + std::to_string(p + 1), params, rng);
  }
}

template <typename T>
Var Encoder<T>::squeeze_block(Tape<T>& tape, std::size_t level, Var c) const {
  if (level < 1 || level > 3) throw Error(ErrorCode::kInvalidInput, "pyramid level must be 1, 2 or 3");
  const auto& dims = tape.value(c).dims();
  if (dims.size() != 5 || dims[0] != in_channels_[level - 1]) {
    throw Error(ErrorCode::kInvalidShape, "squeeze block " + std::to_string(level) + " expects " +
                                              std::to_string(in_channels_[level - 1]) +
                                              " correlation channels, got " + shape_string(dims));
  }
  return run_block(tape, squeeze_[level - 1], c);
}

template <typename T>
Var Encoder<T>::mix_blocks(Tape<T>& tape, const std::array<Var, 3>& squeezed, ShapeTrace* trace) const {
  Var upper = squeezed[2];
  for (std::size_t p = 2; p-- > 0;) {
    const auto& lower = tape.value(squeezed[p]).dims();
    const auto& up = tape.value(upper).dims();
    if (lower.size() != 5 || up.size() != 5 || lower[0] != up[0] || lower[3] != up[3] || lower[4] != up[4]) {
      throw Error(ErrorCode::kInvalidShape,
                  "cannot merge " + shape_string(up) + " into " + shape_string(lower));
    }
    Var merged = ad::add(tape, ad::bilinear_resize(tape, upper, lower[1], lower[2]), squeezed[p]);
    upper = run_block(tape, mix_[p], merged);
    if (trace != nullptr) trace->emplace_back("C" + std::to_string(p + 1) + "_mix", tape.value(upper).dims());
  }
  return upper;
}

template <typename T>
Var Encoder<T>::encode(Tape<T>& tape, const std::array<Var, 3>& pyramid, ShapeTrace* trace) const {
  std::array<Var, 3> squeezed{};
  for (std::size_t p = 3; p-- > 0;) {
    squeezed[p] = squeeze_block(tape, p + 1, pyramid[p]);
    if (trace != nullptr) trace->emplace_back("C" + std::to_string(p + 1) + "_sqz", tape.value(squeezed[p]).dims());
  }
  Var mixed = mix_blocks(tape, squeezed, trace);
  Var z = ad::avg_pool_support_dims(tape, mixed);
  if (trace != nullptr) trace->emplace_back("Z", tape.value(z).dims());
  return z;
}

template Block<float> make_block(const BlockConfig&, const std::string&, ParameterSet<float>&, std::mt19937_64&);
template Block<double> make_block(const BlockConfig&, const std::string&, ParameterSet<double>&, std::mt19937_64&);
template Var run_block(Tape<float>&, const Block<float>&, Var);
template Var run_block(Tape<double>&, const Block<double>&, Var);
template class Encoder<float>;
template class Encoder<double>;

}  // namespace hsnet
