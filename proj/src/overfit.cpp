// SPDX-License-Identifier: Apache-2.0
#include "hsnet/overfit.hpp"

#include "hsnet/metrics.hpp"

namespace hsnet {

template <typename T>
OverfitResult run_overfit(const OverfitConfig& cfg) {
  if (cfg.eval_every == 0) throw Error(ErrorCode::kInvalidSpec, "eval_every must be at least 1");
  const Episode<T> ep = generate_synthetic_episode<T>(cfg.episode);
  HsNet<T> net(make_architecture(cfg.episode.backbone), cfg.model_seed);
  auto state = make_adam_state(net.parameters(), cfg.adam);
  TrainConfig train;
  train.adam = cfg.adam;
  const EpisodeSource<T> source = [&ep](std::size_t, std::size_t) { return ep; };

  OverfitResult result;
  while (result.steps < cfg.max_steps) {
    train.max_steps = std::min(cfg.eval_every, cfg.max_steps - result.steps);
    const auto trace = train_episodes(net, source, train, &state);
    result.losses.insert(result.losses.end(), trace.losses.begin(), trace.losses.end());
    result.steps += trace.losses.size();

    const auto& s = ep.supports.front();
    const auto pred = net.predict(ep.query, s.features, s.mask);
    EvalAccumulator acc;
    acc.accumulate(kshot_vote(std::vector<Tensor<T>>{hard_mask(pred)}), ep.query_mask, ep.class_id);
    result.loss = cross_entropy(pred, ep.query_mask);
    result.miou = miou(acc);
    if (result.loss < cfg.loss_target && result.miou == 1.0) {
      result.reached = true;
      break;
    }
  }
  if (!cfg.checkpoint.empty()) save_checkpoint(cfg.checkpoint, net.parameters(), state);
  return result;
}

template OverfitResult run_overfit<float>(const OverfitConfig&);
template OverfitResult run_overfit<double>(const OverfitConfig&);

}  // namespace hsnet
