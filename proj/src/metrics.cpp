// SPDX-License-Identifier: Apache-2.0
#include "hsnet/metrics.hpp"

#include "hsnet/ops.hpp"

namespace hsnet {
namespace {

double ratio(const IouCounts& c) {
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

void add(IouCounts& into, const IouCounts& from) {
  into.intersection += from.intersection;
  into.union_ += from.union_;
}

}  // namespace

template <typename T>
void EvalAccumulator::accumulate(const Tensor<T>& pred, const Tensor<T>& gt, std::size_t class_id) {
  require_rank(pred, 2, "prediction mask");
  require_same_shape(pred, gt, "accumulate");
  IouCounts fg, bg;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = static_cast<double>(pred[i]);
    double g = static_cast<double>(gt[i]);
    if (p != 0.0 && p != 1.0) throw Error(ErrorCode::kInvalidInput, "prediction mask must be binary");
    if (g == ad::kIgnoreLabel) {
      if (policy_ == IgnorePolicy::kExclude) continue;
      g = 0.0;
    } else if (g != 0.0 && g != 1.0) {
      throw Error(ErrorCode::kInvalidInput, "ground truth value must be 0, 1 or 255");
    }
    const bool pf = p == 1.0, gf = g == 1.0;
    fg.intersection += pf && gf;
    fg.union_ += pf || gf;
    bg.intersection += !pf && !gf;
    bg.union_ += !pf || !gf;
  }
  add(classes_[class_id], fg);
  add(fg_, fg);
  add(bg_, bg);
  ++episodes_;
}

void EvalAccumulator::merge(const EvalAccumulator& other) {
  if (other.policy_ != policy_) throw Error(ErrorCode::kInvalidInput, "cannot merge accumulators with different ignore policies");
  for (const auto& [id, c] : other.classes_) add(classes_[id], c);
  add(fg_, other.fg_);
  add(bg_, other.bg_);
  episodes_ += other.episodes_;
}

double EvalAccumulator::class_iou(std::size_t class_id) const {
  auto it = classes_.find(class_id);
  if (it == classes_.end() || it->second.union_ == 0) {
    throw Error(ErrorCode::kNoData, "class " + std::to_string(class_id) + " has no foreground pixels");
  }
  return ratio(it->second);
}

double miou(const EvalAccumulator& acc) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [id, c] : acc.classes()) {
    if (c.union_ == 0) continue;
    sum += ratio(c);
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::kNoData, "no class with foreground pixels was accumulated");
  return sum / static_cast<double>(n);
}

double fbiou(const EvalAccumulator& acc) {
  if (acc.episodes() == 0) throw Error(ErrorCode::kNoData, "nothing accumulated");
  // A side that never appears in pred or gt has a perfect (empty) match.
  const auto side = [](const IouCounts& c) { return c.union_ == 0 ? 1.0 : ratio(c); };
  return 0.5 * (side(acc.foreground()) + side(acc.background()));
}

template void EvalAccumulator::accumulate(const Tensor<float>&, const Tensor<float>&, std::size_t);
template void EvalAccumulator::accumulate(const Tensor<double>&, const Tensor<double>&, std::size_t);

}  // namespace hsnet
