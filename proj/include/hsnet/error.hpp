// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hsnet {

enum class ErrorCode {
  kInvalidShape,
  kInvalidInput,
  kInvalidSpec,
  kBadMagic,
  kUnsupportedVersion,
  kUnsupportedDType,
  kTruncatedPayload,
  kIo,
  kNonScalarLoss,
  kTapeConsumed,
  kUndefinedLoss,
  kNoData,
  kNanLoss,
  kManifest,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hsnet
