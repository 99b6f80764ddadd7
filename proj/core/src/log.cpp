// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "pressgen/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

namespace pressgen {

std::shared_ptr<spdlog::logger> logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto l = std::make_shared<spdlog::logger>("pressgen", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("pressgen: %l: %v");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return instance;
}

}  // namespace pressgen
