// SPDX-License-Identifier: Apache-2.0
#include "hsnet/error.hpp"

#include "hsnet/tensor.hpp"

namespace hsnet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidShape: return "invalid-shape";
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kInvalidSpec: return "invalid-spec";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kUnsupportedDType: return "unsupported-dtype";
    case ErrorCode::kTruncatedPayload: return "truncated-payload";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kNonScalarLoss: return "non-scalar-loss";
    case ErrorCode::kTapeConsumed: return "tape-consumed";
    case ErrorCode::kUndefinedLoss: return "undefined-loss";
    case ErrorCode::kNoData: return "no-data";
    case ErrorCode::kNanLoss: return "nan-loss";
    case ErrorCode::kManifest: return "manifest";
  }
  return "unknown";
}

std::string shape_string(const Shape& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

}  // namespace hsnet
