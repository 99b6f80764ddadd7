// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pressgen {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidConfig,
  kIo,
  kBadMagic,
  kTruncated,
  kDimensionMismatch,
  kNonFinite,
  kAlreadyNormalized,
  kNotNormalized,
  kEmptyInput,
  kOutOfRange,
  kVersionMismatch,
  kArtifactMismatch,
  kMissingArtifact,
  kLeakage,
  kTimeout,
  kUnreachable,
  kMalformedResponse,
  kNumerical,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception. `field` names the offending
// config key or path when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace pressgen
