// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Run configuration: one JSON document with a section per pipeline stage.
// Every section is parsed and validated up front, whichever command runs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pressgen/codec.hpp"
#include "pressgen/generator.hpp"
#include "pressgen/har.hpp"
#include "pressgen/metrics.hpp"
#include "pressgen/pressure_data.hpp"
#include "pressgen/text_embedding.hpp"

namespace pressgen::cli {

// Salts mixed into the global seed, one per consumer.
enum SeedSalt : std::uint64_t {
  kSaltDataset = 1,
  kSaltReal = 2,
  kSaltEval = 3,
  kSaltSplit = 4,
  kSaltCodec = 5,
  kSaltGenerator = 6,
  kSaltSampling = 7,
  kSaltHar = 8,
};

struct SynthSection {
  SynthConfig dataset;
  std::array<double, 3> split = kDefaultSplitFractions;
  // Real-proxy sets: differently seeded oracle output passed through the
  // sensor gap. `real` trains HAR, `real_eval` evaluates it.
  int real_sequences_per_class = 6;
  int eval_sequences_per_class = 6;
  SensorGapConfig gap;
};

struct EmbeddingSection {
  std::string provider = "hash";  // "hash" | "remote"
  int dim = kTextEmbeddingDim;
  std::uint64_t hash_seed = 0;
  RemoteProviderConfig remote;
  std::optional<std::filesystem::path> cache_dir;
};

struct CodecSection {
  CodecTrainConfig train;
  bool kfold = false;
  std::optional<std::filesystem::path> dataset;  // default: the synth stage's dataset
};

struct GeneratorSection {
  GeneratorTrainConfig train;
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> codec;
};

struct Prompt {
  std::string text;
  std::optional<ActivityClass> label;
  std::uint32_t frames = 0;
};

struct GenerateSection {
  std::vector<Prompt> prompts;
  std::optional<Split> from_split;  // prompts from the dataset's descriptions in this split
  int samples_per_prompt = 1;
  std::uint32_t frames = kCanonicalFrames;
  SamplingConfig sampling;
  int plot_every = 1;  // frame stride of --plot heatmaps
};

struct EvaluateSection {
  Split reference_split = Split::kTest;
  std::optional<std::filesystem::path> reference;  // manifest overriding the split
  std::optional<std::filesystem::path> generated;
  FeatureSpace feature_space = FeatureSpace::kCodecLatent;
  int pca_components = kDefaultPcaComponents;
  double tau = kDefaultContactThreshold;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path run_dir;
  std::filesystem::path base_dir;  // directory of the config file

  SynthSection synth;
  EmbeddingSection embedding;
  CodecSection codec;
  GeneratorSection generator;
  GenerateSection generate;
  EvaluateSection evaluate;
  nlohmann::json har = nlohmann::json::object();  // ExperimentPlan document

  /// Parses and validates; throws Error(kInvalidConfig) naming the field.
  /// `seed_override` and `run_dir_override` come from the command line.
  static RunConfig parse(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                         std::optional<std::uint64_t> seed_override,
                         const std::optional<std::filesystem::path>& run_dir_override);

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  /// `p` relative to the run directory when inside it, as recorded in artifacts.
  std::string display(const std::filesystem::path& p) const;

  // Conventional artifact locations inside the run directory.
  std::filesystem::path stage_dir(const std::string& command) const { return run_dir / command; }
  std::filesystem::path dataset_manifest() const;
  std::filesystem::path codec_checkpoint() const;
  std::filesystem::path generator_checkpoint() const;
  std::filesystem::path generated_manifest() const;

  ExperimentPlan experiment_plan() const;
  std::shared_ptr<const EmbeddingProvider> make_embedder() const;
};

}  // namespace pressgen::cli
