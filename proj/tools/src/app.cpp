// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "app.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include <chrono>
#include <optional>

#include "commands.hpp"
#include "config.hpp"
#include "pressgen/error.hpp"
#include "pressgen/hash.hpp"
#include "pressgen/io_util.hpp"

#ifndef PRESSGEN_VERSION
#define PRESSGEN_VERSION "0.0.0"
#endif

namespace pressgen::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kLeakage:
      return kExitInvalidConfig;
    case ErrorCode::kMissingArtifact:
      return kExitMissingArtifact;
    case ErrorCode::kArtifactMismatch:
    case ErrorCode::kVersionMismatch:
      return kExitArtifactMismatch;
    default:
      return kExitFailure;
  }
}

int report(std::ostream& err, int exit_code, std::string_view error, const std::string& message,
           const std::string& key = {}, const std::string& value = {}) {
  json j = {{"error", error}, {"message", message}, {"exit_code", exit_code}};
  if (!key.empty()) j[key] = value;
  err << j.dump(-1, ' ', false, json::error_handler_t::replace) << std::endl;
  return exit_code;
}

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                  std::chrono::system_clock::now())));
}

struct Options {
  std::string config;
  std::optional<std::string> run_dir;
  std::optional<std::uint64_t> seed;
  bool plot = false;
};

int execute(const std::string& command, const CommandFn& fn, const Options& opt, std::ostream& out,
            std::ostream& err) {
  const fs::path config_path = opt.config;
  if (!fs::is_regular_file(config_path)) {
    return report(err, kExitMissingConfig, "missing_config", "config file not found: " + config_path.string(), "path",
                  config_path.string());
  }
  const std::string text = read_text_file(config_path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    return report(err, kExitInvalidConfig, "invalid_config", std::string("config is not valid JSON: ") + e.what(),
                  "field", "");
  }

  std::optional<fs::path> run_dir;
  if (opt.run_dir) run_dir = fs::absolute(*opt.run_dir);
  const RunConfig cfg =
      RunConfig::parse(doc, fs::absolute(config_path).parent_path(), opt.seed, run_dir);

  const fs::path stage = cfg.stage_dir(command);
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  CommandRecord rec(cfg);
  fn(CommandContext{cfg, opt.plot, out}, rec);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ensure_directory(stage);
  write_text_file(stage / "config.json", text);
  json manifest = {{"command", command},
                   {"tool_version", PRESSGEN_VERSION},
                   {"seed", cfg.seed},
                   {"config_snapshot", "config.json"},
                   {"config_hash", to_hex(fnv1a64(text))},
                   {"inputs", rec.inputs},
                   {"outputs", rec.outputs},
                   {"summary", rec.summary},
                   {"timings", {{"started_at", started}, {"wall_seconds", seconds}}}};
  write_text_file(stage / "run_manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pressgen: text-to-pressure sequence generation pipeline", "pressgen"};
  app.set_version_flag("--version", PRESSGEN_VERSION);
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed = 0;
  std::string run_dir;
  std::vector<std::pair<CLI::App*, const std::pair<std::string, CommandFn>*>> subs;
  for (const auto& entry : commands()) {
    CLI::App* sub = app.add_subcommand(entry.first);
    sub->add_option("--config", opt.config, "run configuration (JSON)")->required();
    sub->add_option("--run-dir", run_dir, "run directory (overrides the config)");
    sub->add_option("--seed", seed, "global seed (overrides the config)");
    if (entry.first == "generate") sub->add_flag("--plot", opt.plot, "write per-frame heatmap PNGs");
    subs.emplace_back(sub, &entry);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << PRESSGEN_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return report(err, kExitUsage, "usage", e.what());
  }

  for (const auto& [sub, entry] : subs) {
    if (!sub->parsed()) continue;
    if (sub->count("--run-dir") > 0) opt.run_dir = run_dir;
    if (sub->count("--seed") > 0) opt.seed = seed;
    try {
      return execute(entry->first, entry->second, opt, out, err);
    } catch (const Error& e) {
      const int code = exit_code_for(e.code());
      const bool is_path = code == kExitMissingArtifact || code == kExitArtifactMismatch;
      return report(err, code, to_string(e.code()), e.what(), is_path ? "path" : "field", e.field());
    } catch (const std::exception& e) {
      return report(err, kExitFailure, "internal", e.what());
    }
  }
  return report(err, kExitUsage, "usage", "no command given");
}

}  // namespace pressgen::cli
