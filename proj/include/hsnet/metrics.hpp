// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>

#include "hsnet/tensor.hpp"

namespace hsnet {

struct IouCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
  bool operator==(const IouCounts&) const = default;
};

enum class IgnorePolicy {
  kExclude,       // 255 pixels count for neither intersection nor union
  kAsBackground,  // 255 pixels are ordinary background
};

// Integer intersection/union counts per class plus global foreground and
// background counts. IoU is formed from the totals, not averaged per episode.
class EvalAccumulator {
 public:
  explicit EvalAccumulator(IgnorePolicy policy = IgnorePolicy::kExclude) : policy_(policy) {}

  // pred (H, W) in {0, 1}; gt (H, W) in {0, 1, 255}.
  template <typename T>
  void accumulate(const Tensor<T>& pred, const Tensor<T>& gt, std::size_t class_id);

  // Requires matching policies.
  void merge(const EvalAccumulator& other);

  IgnorePolicy policy() const { return policy_; }
  const std::map<std::size_t, IouCounts>& classes() const { return classes_; }
  const IouCounts& foreground() const { return fg_; }
  const IouCounts& background() const { return bg_; }
  std::size_t episodes() const { return episodes_; }

  double class_iou(std::size_t class_id) const;
  bool operator==(const EvalAccumulator&) const = default;

 private:
  IgnorePolicy policy_;
  std::map<std::size_t, IouCounts> classes_;
  IouCounts fg_, bg_;
  std::size_t episodes_ = 0;
};

// Mean IoU over classes with a nonzero union.
double miou(const EvalAccumulator& acc);
// Mean of the global foreground and background IoU.
double fbiou(const EvalAccumulator& acc);

}  // namespace hsnet
