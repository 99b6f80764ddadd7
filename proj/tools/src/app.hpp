// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>

namespace pressgen::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitMissingConfig = 2;
inline constexpr int kExitInvalidConfig = 3;
inline constexpr int kExitMissingArtifact = 4;
inline constexpr int kExitArtifactMismatch = 5;
inline constexpr int kExitUsage = 64;

/// Runs one command line; errors go to `err` as single-line JSON.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pressgen::cli
