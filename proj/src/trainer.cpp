// SPDX-License-Identifier: Apache-2.0
#include "hsnet/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "hsnet/ops.hpp"
#include "hsnet/tensor_io.hpp"

namespace hsnet {

template <typename T>
AdamState<T> make_adam_state(const ParameterSet<T>& params, const AdamConfig& cfg) {
  AdamState<T> s;
  s.cfg = cfg;
  for (const auto& p : params) {
    s.m.push_back(Tensor<T>::zeros(p.value.dims()));
    s.v.push_back(Tensor<T>::zeros(p.value.dims()));
  }
  return s;
}

template <typename T>
void adam_step(ParameterSet<T>& params, AdamState<T>& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::kInvalidShape, "optimizer state does not match the parameter set");
  }
  const auto& c = state.cfg;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  std::size_t i = 0;
  for (auto& p : params) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    ++i;
    if (m.dims() != p.value.dims() || v.dims() != p.value.dims() || p.grad.dims() != p.value.dims()) {
      throw Error(ErrorCode::kInvalidShape, "optimizer state for '" + p.id + "' has the wrong shape");
    }
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      const double mk = c.beta1 * m[k] + (1.0 - c.beta1) * g;
      const double vk = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = c.lr * (mk / correct1) / (std::sqrt(vk / correct2) + c.eps);
      p.value[k] = static_cast<T>(p.value[k] - update);
    }
  }
}

template <typename T>
TrainResult train_episodes(HsNet<T>& model, const EpisodeSource<T>& source, const TrainConfig& cfg,
                           AdamState<T>* state) {
  if (cfg.batch == 0) throw Error(ErrorCode::kInvalidSpec, "batch must be at least 1");
  AdamState<T> local;
  if (state == nullptr) {
    local = make_adam_state(model.parameters(), cfg.adam);
    state = &local;
  }
  const std::size_t image = model.architecture().backbone.image_size;
  TrainResult result;
  Tape<T> tape;
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    tape.reset();
    model.parameters().zero_grad();
    std::vector<Var> losses;
    for (std::size_t slot = 0; slot < cfg.batch; ++slot) {
      const Episode<T> ep = source(step, slot);
      if (ep.supports.empty()) throw Error(ErrorCode::kInvalidInput, "episode has no support entries");
      if (ep.query_mask.rank() != 2 || ep.query_mask.dim(0) != image || ep.query_mask.dim(1) != image) {
        throw Error(ErrorCode::kInvalidShape, "query mask " + shape_string(ep.query_mask.dims()) +
                                                  " does not match image size " + std::to_string(image));
      }
      const auto& s = ep.supports.front();
      Var logits = model.forward(tape, ep.query, s.features, s.mask);
      losses.push_back(ad::cross_entropy(tape, logits, ep.query_mask));
    }
    Var total = losses.front();
    for (std::size_t i = 1; i < losses.size(); ++i) total = ad::add(tape, total, losses[i]);
    Var loss = ad::scale(tape, total, static_cast<T>(1.0 / static_cast<double>(cfg.batch)));
    const double value = tape.value(loss)[0];
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::kNanLoss, "non-finite loss at step " + std::to_string(step));
    }
    result.losses.push_back(value);
    tape.backward(loss);
    adam_step(model.parameters(), *state);
    if (cfg.stop_loss > 0.0 && value < cfg.stop_loss) break;
  }
  return result;
}

namespace {

std::string join_dims(const Shape& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const ParameterSet<T>& params, const AdamState<T>& state) {
  if (state.m.size() != params.size()) throw Error(ErrorCode::kInvalidShape, "optimizer state does not match");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw Error(ErrorCode::kIo, "cannot write " + (dir / "manifest.txt").string());
  manifest << "dtype=" << (dtype_of<T>() == DType::kFloat32 ? "f32" : "f64") << "\n";
  manifest << "step=" << state.step << "\n";
  std::size_t i = 0;
  for (const auto& p : params) {
    manifest << "param=" << p.id << " " << join_dims(p.value.dims()) << "\n";
    write_tensor(p.value, dir / (p.id + ".hstn"));
    write_tensor(state.m[i], dir / (p.id + ".adam_m.hstn"));
    write_tensor(state.v[i], dir / (p.id + ".adam_v.hstn"));
    ++i;
  }
  if (!manifest) throw Error(ErrorCode::kIo, "write failed for " + (dir / "manifest.txt").string());
}

template <typename T>
void load_checkpoint(const std::filesystem::path& dir, ParameterSet<T>& params, AdamState<T>& state) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw Error(ErrorCode::kIo, "cannot read " + (dir / "manifest.txt").string());
  std::vector<std::string> ids;
  std::uint64_t step = 0;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.rfind("step=", 0) == 0) {
      step = std::stoull(line.substr(5));
    } else if (line.rfind("param=", 0) == 0) {
      ids.push_back(line.substr(6, line.find(' ') - 6));
    }
  }
  if (ids.size() != params.size()) {
    throw Error(ErrorCode::kManifest, "checkpoint lists " + std::to_string(ids.size()) + " parameters, model has " +
                                          std::to_string(params.size()));
  }
  AdamState<T> loaded = make_adam_state(params, state.cfg);
  loaded.step = step;
  std::size_t i = 0;
  std::vector<Tensor<T>> values;
  for (auto& p : params) {
    if (ids[i] != p.id) throw Error(ErrorCode::kManifest, "checkpoint parameter " + ids[i] + " != " + p.id);
    auto v = read_tensor_as<T>(dir / (p.id + ".hstn"));
    auto m = read_tensor_as<T>(dir / (p.id + ".adam_m.hstn"));
    auto s = read_tensor_as<T>(dir / (p.id + ".adam_v.hstn"));
    if (v.dims() != p.value.dims() || m.dims() != p.value.dims() || s.dims() != p.value.dims()) {
      throw Error(ErrorCode::kInvalidShape, "checkpoint tensor for '" + p.id + "' has shape " +
                                                shape_string(v.dims()) + ", expected " + shape_string(p.value.dims()));
    }
    values.push_back(std::move(v));
    loaded.m[i] = std::move(m);
    loaded.v[i] = std::move(s);
    ++i;
  }
  // Commit only after everything loaded.
  i = 0;
  for (auto& p : params) p.value = std::move(values[i++]);
  state = std::move(loaded);
}

template AdamState<float> make_adam_state(const ParameterSet<float>&, const AdamConfig&);
template AdamState<double> make_adam_state(const ParameterSet<double>&, const AdamConfig&);
template void adam_step(ParameterSet<float>&, AdamState<float>&);
template void adam_step(ParameterSet<double>&, AdamState<double>&);
template TrainResult train_episodes(HsNet<float>&, const EpisodeSource<float>&, const TrainConfig&, AdamState<float>*);
template TrainResult train_episodes(HsNet<double>&, const EpisodeSource<double>&, const TrainConfig&,
                                    AdamState<double>*);
template void save_checkpoint(const std::filesystem::path&, const ParameterSet<float>&, const AdamState<float>&);
template void save_checkpoint(const std::filesystem::path&, const ParameterSet<double>&, const AdamState<double>&);
template void load_checkpoint(const std::filesystem::path&, ParameterSet<float>&, AdamState<float>&);
template void load_checkpoint(const std::filesystem::path&, ParameterSet<double>&, AdamState<double>&);

}  // namespace hsnet
