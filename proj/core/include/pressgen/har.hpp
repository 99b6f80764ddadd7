// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Activity recognition harness: sliding windows over pressure sequences, a
// small temporal convolution classifier, and a repeated experiment runner
// comparing training-set recipes on a shared evaluation set.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pressgen/metrics.hpp"
#include "pressgen/nn.hpp"
#include "pressgen/pressure_data.hpp"

namespace pressgen {

struct HarExample {
  nn::Matrix window;  // H*W x window_len, normalized
  int label = 0;
  std::string sequence_id;
};

/// Windows of `window_len` frames every `stride` frames. Sequences shorter
/// than the window are skipped with a warning. Raw sequences are normalized.
std::vector<HarExample> windowize(std::span<const PressureSequence> seqs, std::span<const std::string> ids,
                                  int window_len, int stride);
std::vector<HarExample> windowize(const DatasetManifest& manifest, int window_len, int stride);

struct HarConfig {
  int window = 32;
  int stride = 16;
  int hidden = 16;
  int kernel = 5;
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double val_fraction = 0.2;
  int patience = 10;  // epochs without validation improvement; 0 disables
  std::uint64_t seed = 0;

  void validate() const;
};

// Conv1d(H*W -> hidden) -> ReLU -> Conv1d(hidden -> hidden) -> ReLU ->
// mean over time -> Linear(hidden -> classes).
class HarModel {
 public:
  static constexpr std::string_view kCheckpointKind = "har";

  HarModel(int channels, int window, int hidden, int kernel, std::vector<std::string> class_names, std::uint64_t seed);

  int channels() const { return channels_; }
  int window() const { return window_; }
  int num_classes() const { return static_cast<int>(class_names_.size()); }
  const std::vector<std::string>& class_names() const { return class_names_; }

  nn::Vector logits(const nn::Matrix& window) const;
  int predict(const nn::Matrix& window) const;

  /// Mean cross-entropy over the batch; accumulates gradients when `train`.
  double batch_loss(std::span<const HarExample* const> batch, bool train);

  nn::ParameterList parameters();
  nn::CheckpointContainer to_checkpoint() const;
  static HarModel from_checkpoint(const nn::CheckpointContainer& ckpt);

 private:
  int channels_, window_, hidden_, kernel_;
  std::vector<std::string> class_names_;
  nn::Conv1d conv1_, conv2_;
  nn::Linear head_;
};

/// Class names of the activity labels, indexed by label id.
std::vector<std::string> activity_class_names();

struct HarTrainResult {
  HarModel model;
  std::vector<double> train_loss;      // per epoch
  std::vector<double> validation_f1;   // per epoch
  int best_epoch = 0;
};

/// Requires at least two classes among the examples.
HarTrainResult train_har(std::span<const HarExample> examples, const HarConfig& cfg);

/// Window-level macro F1 with per-class breakdown.
MetricReport eval_har(const HarModel& model, std::span<const HarExample> examples);

// ---------------------------------------------------------------------------
// Experiments

enum class Recipe : std::uint8_t { kSyntheticOnly, kRealOnly, kCombined, kCombinedWithAugmented };
std::string_view to_string(Recipe r);
Recipe parse_recipe(std::string_view name);

struct ExperimentPlan {
  std::filesystem::path synthetic_manifest;
  std::filesystem::path real_manifest;
  std::optional<std::filesystem::path> augmented_manifest;
  std::filesystem::path evaluation_manifest;
  std::vector<Recipe> recipes{Recipe::kSyntheticOnly, Recipe::kRealOnly, Recipe::kCombined};
  int repetitions = 5;
  std::uint64_t base_seed = 0;
  HarConfig har;

  /// Relative paths resolve against `base_dir`.
  static ExperimentPlan from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  nlohmann::json to_json() const;
  void validate() const;
};

// In-memory sequences with a stable identity per sequence (canonical file
// path for manifest data).
struct LabeledSet {
  std::vector<PressureSequence> sequences;
  std::vector<std::string> ids;
};

LabeledSet load_labeled_set(const std::filesystem::path& manifest_path);

struct ExperimentData {
  LabeledSet synthetic;
  LabeledSet real;
  std::optional<LabeledSet> augmented;
  LabeledSet evaluation;
};

struct RecipeAggregate {
  Recipe recipe = Recipe::kRealOnly;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  int runs = 0;
};

struct ExperimentResult {
  std::vector<MetricReport> reports;  // recipe-major, one per repetition
  std::vector<RecipeAggregate> aggregates;

  nlohmann::json to_json() const;
  /// "recipe  mean +/- std" rows.
  std::string table() const;
};

/// Throws Error(kLeakage) if any training sequence id appears in the
/// evaluation set; checked for every recipe before training starts.
void check_no_leakage(const ExperimentData& data, std::span<const Recipe> recipes);

ExperimentResult run_experiment(const ExperimentData& data, std::span<const Recipe> recipes, int repetitions,
                                std::uint64_t base_seed, const HarConfig& cfg);

/// Loads the plan's manifests, runs it and, when `report_dir` is non-empty,
/// writes one JSON file per report plus aggregates.json.
ExperimentResult run_experiment(const ExperimentPlan& plan, const std::filesystem::path& report_dir);

}  // namespace pressgen
