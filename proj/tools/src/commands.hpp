// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace pressgen::cli {

// What a command read and wrote; becomes part of run_manifest.json.
struct CommandRecord {
  explicit CommandRecord(const RunConfig& cfg) : config(cfg) {}

  const RunConfig& config;
  std::map<std::string, std::string> inputs;  // path -> content hash
  std::vector<std::string> outputs;
  nlohmann::json summary = nlohmann::json::object();

  void input(const std::filesystem::path& path);
  void output(const std::filesystem::path& path) { outputs.push_back(config.display(path)); }
};

struct CommandContext {
  const RunConfig& config;
  bool plot = false;
  std::ostream& out;
};

using CommandFn = std::function<void(const CommandContext&, CommandRecord&)>;

/// Command name -> implementation, in pipeline order.
const std::vector<std::pair<std::string, CommandFn>>& commands();

void cmd_synth(const CommandContext& ctx, CommandRecord& rec);
void cmd_train_codec(const CommandContext& ctx, CommandRecord& rec);
void cmd_train_generator(const CommandContext& ctx, CommandRecord& rec);
void cmd_generate(const CommandContext& ctx, CommandRecord& rec);
void cmd_evaluate(const CommandContext& ctx, CommandRecord& rec);
void cmd_har(const CommandContext& ctx, CommandRecord& rec);

}  // namespace pressgen::cli
