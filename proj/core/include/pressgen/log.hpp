// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace pressgen {

/// Library-wide logger named "pressgen" (stderr sink by default). Tests and
/// tools may replace its sinks or level.
std::shared_ptr<spdlog::logger> logger();

}  // namespace pressgen
