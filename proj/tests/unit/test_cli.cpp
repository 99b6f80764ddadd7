// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <sstream>

#include "app.hpp"
#include "pressgen/io_util.hpp"
#include "test_support.hpp"

namespace pressgen::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
  json error() const { return json::parse(err); }
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "pressgen");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

json tiny_config() {
  return json::parse(R"({
    "seed": 3,
    "run_dir": "run",
    "synth": {"sequences_per_class": 4, "height": 8, "width": 4, "frames_per_sequence": 48,
              "split": [0.5, 0.25, 0.25], "real_sequences_per_class": 2, "eval_sequences_per_class": 2},
    "embedding": {"provider": "hash", "dim": 16},
    "codec": {"codebook_size": 16, "latent_dim": 8, "hidden": 8, "residual_blocks": 1, "steps": 30,
              "warmup_steps": 10, "eval_every": 10},
    "generator": {"layers": 1, "heads": 2, "width": 16, "max_len": 16, "steps": 20},
    "generate": {"prompts": ["a person walks forward", {"text": "a person holds a plank", "class_label": "workout"}],
                 "frames": 48},
    "har": {"repetitions": 2, "epochs": 1, "hidden": 4, "window": 16, "stride": 16}
  })");
}

class CliTest : public ::testing::Test {
 protected:
  fs::path write_config(const json& j, const std::string& name = "config.json") {
    const fs::path p = dir_ / name;
    write_text_file(p, j.dump(2));
    return p;
  }

  Result cmd(const std::string& command, const fs::path& config, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {command, "--config", config.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return invoke(args);
  }

  void pipeline_until(const fs::path& config, const std::string& last) {
    for (const char* c : {"synth", "train-codec", "train-generator", "generate", "evaluate", "har"}) {
      const Result r = cmd(c, config);
      ASSERT_EQ(r.code, 0) << c << ": " << r.err;
      if (last == c) return;
    }
  }

  TempDir dir_;
};

TEST_F(CliTest, MissingConfigExitsTwoAndNamesPath) {
  const Result r = cmd("synth", dir_ / "absent.json");
  EXPECT_EQ(r.code, kExitMissingConfig);
  EXPECT_EQ(r.error()["path"], (dir_ / "absent.json").string());
  EXPECT_EQ(r.err.find('\n'), r.err.size() - 1);
}

TEST_F(CliTest, InvalidConfigExitsThreeAndNamesField) {
  json j = tiny_config();
  j["codec"]["codebook_size"] = 0;
  Result r = cmd("synth", write_config(j));
  EXPECT_EQ(r.code, kExitInvalidConfig);
  EXPECT_EQ(r.error()["field"], "codec.codebook_size");
  EXPECT_FALSE(fs::exists(dir_ / "run"));

  j = tiny_config();
  j["synth"]["heigth"] = 4;
  r = cmd("synth", write_config(j));
  EXPECT_EQ(r.code, kExitInvalidConfig);
  EXPECT_EQ(r.error()["field"], "synth.heigth");

  write_text_file(dir_ / "broken.json", "{\"seed\": ");
  EXPECT_EQ(cmd("synth", dir_ / "broken.json").code, kExitInvalidConfig);
  EXPECT_EQ(invoke({"synth"}).code, kExitUsage);
}

TEST_F(CliTest, MissingUpstreamArtifactsExitFour) {
  const fs::path cfg = write_config(tiny_config());
  ASSERT_EQ(cmd("synth", cfg).code, 0);
  const Result r = cmd("train-generator", cfg);
  EXPECT_EQ(r.code, kExitMissingArtifact);
  EXPECT_NE(r.error()["path"].get<std::string>().find("codec.ckpt"), std::string::npos);
  EXPECT_EQ(cmd("evaluate", cfg).code, kExitMissingArtifact);
}

TEST_F(CliTest, SynthWritesDatasetsAndRunManifest) {
  const fs::path cfg = write_config(tiny_config());
  ASSERT_EQ(cmd("synth", cfg, {"--seed", "11"}).code, 0);
  const json m = json::parse(read_text_file(dir_ / "run/synth/run_manifest.json"));
  EXPECT_EQ(m["command"], "synth");
  EXPECT_EQ(m["seed"], 11);
  EXPECT_TRUE(m.contains("tool_version"));
  EXPECT_TRUE(m["timings"].contains("wall_seconds"));
  EXPECT_EQ(read_text_file(dir_ / "run/synth/config.json"), read_text_file(cfg));
  for (const char* sub : {"dataset", "real", "real_eval"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run/synth" / sub / "manifest.json")) << sub;
  }
  EXPECT_EQ(json::parse(read_text_file(dir_ / "run/synth/dataset/manifest.json"))["entries"].size(), 16u);
}

TEST_F(CliTest, CodecLossCsvIsMonotoneAndReproducible) {
  const fs::path cfg = write_config(tiny_config());
  pipeline_until(cfg, "train-codec");
  const std::string first = read_text_file(dir_ / "run/train-codec/loss.csv");
  std::istringstream lines(first);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "step,L_r,L_q,w_r,w_q,total");
  long expected = 0;
  while (std::getline(lines, line)) EXPECT_EQ(std::stol(line.substr(0, line.find(','))), expected++);
  EXPECT_EQ(expected, 30);
  ASSERT_EQ(cmd("train-codec", cfg).code, 0);
  EXPECT_EQ(read_text_file(dir_ / "run/train-codec/loss.csv"), first);
}

TEST_F(CliTest, GenerateWritesOneFilePerPromptAndIsDeterministic) {
  const fs::path cfg = write_config(tiny_config());
  pipeline_until(cfg, "generate");
  const json index = json::parse(read_text_file(dir_ / "run/generate/index.json"));
  ASSERT_EQ(index.size(), 2u);
  EXPECT_EQ(index[0]["text"], "a person walks forward");
  EXPECT_EQ(index[1]["class_label"], "workout");
  const fs::path first = dir_ / "run/generate" / index[0]["file"].get<std::string>();
  const auto bytes = read_binary_file(first);
  EXPECT_EQ(load_sequence(first).frames(), 48u);

  ASSERT_EQ(cmd("generate", cfg, {"--plot"}).code, 0);
  EXPECT_EQ(read_binary_file(first), bytes);
  const fs::path png = dir_ / "run/generate/plots/gen_00000/frame_0000.png";
  ASSERT_TRUE(fs::exists(png));
  const auto head = read_binary_file(png);
  EXPECT_EQ(std::to_integer<int>(head[1]), 'P');
  EXPECT_EQ(std::to_integer<int>(head[2]), 'N');
}

TEST_F(CliTest, GenerateRejectsAForeignCodec) {
  const fs::path cfg = write_config(tiny_config());
  pipeline_until(cfg, "train-generator");
  ASSERT_EQ(cmd("train-codec", cfg, {"--seed", "99"}).code, 0);
  const Result r = cmd("generate", cfg);
  EXPECT_EQ(r.code, kExitArtifactMismatch);
  EXPECT_EQ(r.error()["error"], "artifact_mismatch");
}

TEST_F(CliTest, EvaluateReferenceAgainstItself) {
  json j = tiny_config();
  j["evaluate"] = {{"reference", "run/synth/dataset/manifest.json"}, {"generated", "run/synth/dataset/manifest.json"}};
  const fs::path cfg = write_config(j);
  pipeline_until(cfg, "train-codec");
  ASSERT_EQ(cmd("evaluate", cfg).code, 0);
  const json report = json::parse(read_text_file(dir_ / "run/evaluate/report.json"));
  EXPECT_LE(report["fid"].get<double>(), 1e-6);
  EXPECT_DOUBLE_EQ(report["r2"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report["binarized_r2"].get<double>(), 1.0);
  EXPECT_EQ(report["config"]["feature_space"], "codec-latent");
  EXPECT_TRUE(report["config"].contains("tau"));

  j["evaluate"]["generated"] = "run/nowhere/manifest.json";
  EXPECT_EQ(cmd("evaluate", write_config(j, "missing.json")).code, kExitMissingArtifact);
}

TEST_F(CliTest, HarTableAndLeakage) {
  json j = tiny_config();
  j["har"]["augmented_manifest"] = "run/synth/real/manifest.json";
  j["har"]["real_manifest"] = "run/synth/dataset/manifest.json";
  j["har"]["recipes"] = {"synthetic-only", "real-only", "combined", "combined-with-augmented"};
  const fs::path cfg = write_config(j);
  pipeline_until(cfg, "generate");
  Result r = cmd("har", cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  const json agg = json::parse(read_text_file(dir_ / "run/har/aggregates.json"));
  EXPECT_EQ(agg["aggregates"].size(), 4u);
  EXPECT_NE(r.out.find("combined-with-augmented"), std::string::npos);
  const std::string first = read_text_file(dir_ / "run/har/aggregates.json");
  ASSERT_EQ(cmd("har", cfg).code, 0);
  EXPECT_EQ(read_text_file(dir_ / "run/har/aggregates.json"), first);

  j["har"]["evaluation_manifest"] = "run/synth/dataset/manifest.json";
  r = cmd("har", write_config(j, "leaky.json"));
  EXPECT_EQ(r.code, kExitInvalidConfig);
  EXPECT_EQ(r.error()["error"], "leakage");
}

}  // namespace
}  // namespace pressgen::cli
