// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "pressgen/error.hpp"
#include "pressgen/har.hpp"
#include "test_support.hpp"

namespace pressgen {
namespace {

using testing::code_of;
using testing::LogCapture;
using testing::TempDir;
using testing::toy_sequences;

std::vector<std::string> ids_for(const std::vector<PressureSequence>& seqs, const std::string& prefix) {
  std::vector<std::string> ids;
  for (const auto& s : seqs) ids.push_back(prefix + s.activity_id);
  return ids;
}

HarConfig fast_config() {
  HarConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 8;
  cfg.patience = 0;
  cfg.seed = 1;
  return cfg;
}

TEST(Windowize, Counts) {
  const auto seqs = toy_sequences(1, 1);
  const std::vector<PressureSequence> one = {seqs[0]};
  EXPECT_EQ(windowize(one, {}, 32, 16).size(), 6u);
  const std::vector<PressureSequence> exact = toy_sequences(1, 1, 16, 8, 32);
  EXPECT_EQ(windowize(std::span(exact).first(1), {}, 32, 16).size(), 1u);
  const auto short_seqs = toy_sequences(1, 1, 16, 8, 16);
  LogCapture log;
  EXPECT_TRUE(windowize(std::span(short_seqs).first(1), {}, 32, 16).empty());
  EXPECT_NE(log.text().find("shorter"), std::string::npos);
}

TEST(Windowize, LabelsAndNormalization) {
  SynthConfig cfg;
  cfg.height = 8;
  cfg.width = 4;
  cfg.sequences_per_class = 1;
  const auto raw = synthesize_sequences(cfg);
  const auto ex = windowize(raw, {}, 32, 16);
  ASSERT_EQ(ex.size(), 24u);
  EXPECT_EQ(ex[0].label, 0);
  EXPECT_EQ(ex[23].label, 3);
  EXPECT_LE(ex[0].window.maxCoeff(), 1.0);
  EXPECT_EQ(ex[0].window.rows(), 32);
  EXPECT_EQ(ex[0].window.cols(), 32);
}

TEST(TrainHar, FitsSeparableOracleData) {
  const auto seqs = toy_sequences(4, 2);
  const auto ex = windowize(seqs, ids_for(seqs, "t/"), 32, 16);
  HarConfig cfg = fast_config();
  cfg.epochs = 30;
  cfg.val_fraction = 0.0;
  const HarTrainResult r = train_har(ex, cfg);
  const MetricReport rep = eval_har(r.model, ex);
  EXPECT_GT(*rep.macro_f1, 0.95);
  EXPECT_EQ(rep.per_class_f1.size(), 4u);
  EXPECT_EQ(rep.class_names, activity_class_names());
}

TEST(TrainHar, DeterministicAndValidated) {
  const auto seqs = toy_sequences(2, 3);
  const auto ex = windowize(seqs, ids_for(seqs, "t/"), 32, 16);
  auto a = train_har(ex, fast_config());
  auto b = train_har(ex, fast_config());
  EXPECT_EQ(nn::parameter_hash(a.model.parameters()), nn::parameter_hash(b.model.parameters()));
  EXPECT_EQ(a.train_loss, b.train_loss);

  std::vector<HarExample> one_class;
  for (const auto& e : ex) {
    if (e.label == 0) one_class.push_back(e);
  }
  EXPECT_EQ(code_of([&] { train_har(one_class, fast_config()); }), ErrorCode::kInvalidArgument);
  std::vector<HarExample> none;
  EXPECT_EQ(code_of([&] { eval_har(a.model, none); }), ErrorCode::kEmptyInput);
  HarConfig bad = fast_config();
  bad.kernel = 0;
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::kInvalidConfig);
}

// Untrained classifiers on balanced data score near chance.
TEST(EvalHar, RandomModelNearChance) {
  const auto seqs = toy_sequences(4, 4);
  const auto ex = windowize(seqs, {}, 32, 16);
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const HarModel model(128, 32, 16, 5, activity_class_names(), seed);
    sum += *eval_har(model, ex).macro_f1;
  }
  const double mean = sum / 5.0;
  EXPECT_GE(mean, 0.10);
  EXPECT_LE(mean, 0.40);
}

TEST(HarModel, CheckpointRoundTrip) {
  const HarModel model(128, 32, 8, 5, activity_class_names(), 3);
  const HarModel back = HarModel::from_checkpoint(model.to_checkpoint());
  const auto seqs = toy_sequences(1, 5);
  const auto ex = windowize(seqs, {}, 32, 16);
  EXPECT_EQ(back.logits(ex[0].window), model.logits(ex[0].window));
}

ExperimentData toy_experiment_data() {
  ExperimentData d;
  auto add = [](LabeledSet& set, std::vector<PressureSequence> seqs, const std::string& prefix) {
    set.ids = ids_for(seqs, prefix);
    set.sequences = std::move(seqs);
  };
  add(d.synthetic, toy_sequences(2, 10), "syn/");
  add(d.real, toy_sequences(2, 11), "real/");
  d.augmented.emplace();
  add(*d.augmented, toy_sequences(1, 12), "aug/");
  add(d.evaluation, toy_sequences(2, 13), "eval/");
  return d;
}

TEST(Experiment, CountsAndDeterminism) {
  const ExperimentData data = toy_experiment_data();
  const std::vector<Recipe> recipes = {Recipe::kSyntheticOnly, Recipe::kRealOnly, Recipe::kCombined,
                                       Recipe::kCombinedWithAugmented};
  HarConfig cfg = fast_config();
  cfg.epochs = 2;
  const ExperimentResult a = run_experiment(data, recipes, 5, 7, cfg);
  EXPECT_EQ(a.reports.size(), 20u);
  EXPECT_EQ(a.aggregates.size(), 4u);
  EXPECT_EQ(a.aggregates[3].runs, 5);
  const ExperimentResult b = run_experiment(data, recipes, 5, 7, cfg);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_NE(a.table().find("combined-with-augmented"), std::string::npos);
}

TEST(Experiment, LeakageRejectedBeforeTraining) {
  ExperimentData data = toy_experiment_data();
  data.real.ids[1] = data.evaluation.ids[0];
  const std::vector<Recipe> recipes = {Recipe::kSyntheticOnly, Recipe::kRealOnly};
  LogCapture log;
  EXPECT_EQ(code_of([&] { run_experiment(data, recipes, 1, 0, fast_config()); }), ErrorCode::kLeakage);
  EXPECT_EQ(code_of([&] { check_no_leakage(data, recipes); }), ErrorCode::kLeakage);
  const std::vector<Recipe> synthetic_only = {Recipe::kSyntheticOnly};
  EXPECT_NO_THROW(check_no_leakage(data, synthetic_only));
}

TEST(Experiment, PlanFromJson) {
  const nlohmann::json j = {{"synthetic_manifest", "syn/manifest.json"},
                            {"real_manifest", "/abs/real.json"},
                            {"evaluation_manifest", "eval.json"},
                            {"recipes", {"real-only", "combined"}},
                            {"repetitions", 3},
                            {"window", 16}};
  const ExperimentPlan p = ExperimentPlan::from_json(j, "/base");
  EXPECT_EQ(p.synthetic_manifest, std::filesystem::path("/base/syn/manifest.json"));
  EXPECT_EQ(p.real_manifest, std::filesystem::path("/abs/real.json"));
  EXPECT_EQ(p.recipes, (std::vector<Recipe>{Recipe::kRealOnly, Recipe::kCombined}));
  EXPECT_EQ(p.har.window, 16);
  EXPECT_NO_THROW(p.validate());
  nlohmann::json bad = j;
  bad["recipes"] = {"everything"};
  EXPECT_EQ(code_of([&] { ExperimentPlan::from_json(bad, "/base"); }), ErrorCode::kInvalidConfig);
  ExperimentPlan needs_aug = p;
  needs_aug.recipes = {Recipe::kCombinedWithAugmented};
  EXPECT_EQ(code_of([&] { needs_aug.validate(); }), ErrorCode::kInvalidConfig);
}

TEST(Experiment, ManifestPlanWritesReports) {
  TempDir dir;
  auto write = [&](const std::string& name, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.height = 8;
    cfg.width = 4;
    cfg.frames_per_sequence = 48;
    cfg.sequences_per_class = 1;
    cfg.seed = seed;
    return synth_dataset(cfg, dir / name);
  };
  write("syn", 1);
  write("real", 2);
  write("eval", 3);
  ExperimentPlan plan;
  plan.synthetic_manifest = dir / "syn/manifest.json";
  plan.real_manifest = dir / "real/manifest.json";
  plan.evaluation_manifest = dir / "eval/manifest.json";
  plan.repetitions = 2;
  plan.har = fast_config();
  plan.har.epochs = 1;
  const ExperimentResult r = run_experiment(plan, dir / "reports");
  EXPECT_EQ(r.reports.size(), 6u);
  EXPECT_TRUE(std::filesystem::exists(dir / "reports/aggregates.json"));

  plan.evaluation_manifest = plan.real_manifest;
  EXPECT_EQ(code_of([&] { run_experiment(plan, {}); }), ErrorCode::kLeakage);
}

}  // namespace
}  // namespace pressgen
