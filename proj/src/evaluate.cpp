// SPDX-License-Identifier: Apache-2.0
#include "hsnet/evaluate.hpp"

#include "hsnet/error.hpp"

namespace hsnet {

template <typename T>
ManifestEvalResult evaluate_manifest(const EpisodeManifest& manifest, const HsNet<T>* model,
                                     const ManifestEvalOptions& options) {
  options.vote.validate();
  if (model && model->architecture().backbone.tag != manifest.backbone) {
    throw Error(ErrorCode::kInvalidSpec, "model backbone " + std::string(to_string(model->architecture().backbone.tag)) +
                                             " != manifest backbone " + std::string(to_string(manifest.backbone)));
  }
  const auto sched = backbone_schedule(manifest.backbone);
  ManifestEvalResult r{EvalAccumulator(options.policy)};
  for (const auto& entry : manifest.episodes) {
    const auto gt = load_mask<T>(entry.query_mask);
    if (entry.prediction) {
      r.accumulator.accumulate(load_mask<T>(*entry.prediction), gt, entry.class_id);
      ++r.from_files;
      continue;
    }
    if (!model) throw Error(ErrorCode::kInvalidSpec, entry.name + ": no prediction file and no model");
    const auto ep = load_episode<T>(entry, sched);
    r.accumulator.accumulate(model->predict_mask(ep, options.vote), gt, entry.class_id);
    ++r.from_model;
  }
  return r;
}

template ManifestEvalResult evaluate_manifest(const EpisodeManifest&, const HsNet<float>*, const ManifestEvalOptions&);
template ManifestEvalResult evaluate_manifest(const EpisodeManifest&, const HsNet<double>*, const ManifestEvalOptions&);

}  // namespace hsnet
