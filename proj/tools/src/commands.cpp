// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>

#include "png.hpp"
#include "pressgen/error.hpp"
#include "pressgen/hash.hpp"
#include "pressgen/io_util.hpp"
#include "pressgen/log.hpp"

namespace pressgen::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kHeatmapScale = 8;

void require(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kMissingArtifact, what + " not found: " + path.string() + " (run the upstream command first)",
                path.string());
  }
}

fs::path dataset_path(const RunConfig& cfg, const std::optional<fs::path>& override_path) {
  return override_path.value_or(cfg.dataset_manifest());
}

fs::path codec_path(const RunConfig& cfg) { return cfg.generator.codec.value_or(cfg.codec_checkpoint()); }

std::vector<ManifestEntry> training_entries(const DatasetManifest& m) {
  return m.splits.empty() ? m.entries : m.entries_in(Split::kTrain);
}

// Sensor-gap copy of a freshly seeded oracle dataset.
void write_real_proxy(const RunConfig& cfg, int per_class, std::uint64_t salt, const fs::path& dir,
                      CommandRecord& rec) {
  SynthConfig sc = cfg.synth.dataset;
  sc.sequences_per_class = per_class;
  sc.seed = mix_seed(cfg.seed, salt);
  std::vector<PressureSequence> seqs = synthesize_sequences(sc);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    seqs[i] = apply_sensor_gap(seqs[i], cfg.synth.gap, mix_seed(sc.seed, i));
  }
  write_dataset(seqs, dir, sc.seed);
  rec.output(dir / kManifestFileName);
}

void write_codec_csv(const fs::path& path, const std::vector<LossBreakdown>& history) {
  std::string csv = "step,L_r,L_q,w_r,w_q,total\n";
  for (const auto& h : history) {
    csv += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", h.step, h.reconstruction, h.quantization,
                       h.w_r, h.w_q, h.total);
  }
  write_text_file(path, csv);
}

json validation_json(const CodecTrainResult& r) {
  json v = json::array();
  for (const auto& rec : r.validation) v.push_back({{"step", rec.step}, {"reconstruction_mse", rec.reconstruction}});
  return {{"best_step", r.best_step},
          {"best_validation_mse", r.best_validation},
          {"stopped_early", r.stopped_early},
          {"steps_run", r.history.size()},
          {"validation", v}};
}

std::vector<PressureSequence> load_normalized(const DatasetManifest& m, const std::vector<ManifestEntry>& entries) {
  std::vector<PressureSequence> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(normalize(load_entry(m, e)));
  return out;
}

// Class of the built-in description closest to `text` in embedding space.
ActivityClass nearest_class(const TextEmbedding& text, const EmbeddingProvider& embedder) {
  ActivityClass best = ActivityClass::kBasic;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (ActivityClass c : kAllActivityClasses) {
    for (int v = 0; v < 4; ++v) {
      const double sim = cosine_similarity(text, embedder.embed(activity_description(c, v)));
      if (sim > best_sim) {
        best_sim = sim;
        best = c;
      }
    }
  }
  return best;
}

void plot_sequence(const PressureSequence& seq, const fs::path& dir, int every, CommandRecord& rec) {
  ensure_directory(dir);
  for (std::uint32_t t = 0; t < seq.frames(); t += static_cast<std::uint32_t>(every)) {
    const fs::path p = dir / fmt::format("frame_{:04d}.png", t);
    write_heatmap_png(p, seq.frame(t), seq.height(), seq.width(), kHeatmapScale);
    rec.output(p);
  }
}

}  // namespace

void CommandRecord::input(const fs::path& path) { inputs[config.display(path)] = file_content_hash(path); }

void cmd_synth(const CommandContext& ctx, CommandRecord& rec) {
  const RunConfig& cfg = ctx.config;
  const fs::path dir = cfg.stage_dir("synth");
  const DatasetManifest full = synth_dataset(cfg.synth.dataset, dir / "dataset");
  const DatasetManifest split = split_dataset(full, cfg.synth.split, mix_seed(cfg.seed, kSaltSplit));
  write_manifest(split, cfg.dataset_manifest());
  rec.output(cfg.dataset_manifest());
  write_real_proxy(cfg, cfg.synth.real_sequences_per_class, kSaltReal, dir / "real", rec);
  write_real_proxy(cfg, cfg.synth.eval_sequences_per_class, kSaltEval, dir / "real_eval", rec);

  json counts = json::object();
  for (Split s : {Split::kTrain, Split::kTest, Split::kVal}) counts[std::string(to_string(s))] = split.entries_in(s).size();
  rec.summary = {{"sequences", full.entries.size()}, {"frames", full.total_frames()}, {"splits", counts}};
  ctx.out << fmt::format("synthesized {} sequences ({} frames) into {}\n", full.entries.size(), full.total_frames(),
                         dir.string());
}

void cmd_train_codec(const CommandContext& ctx, CommandRecord& rec) {
  const RunConfig& cfg = ctx.config;
  const fs::path manifest_path = dataset_path(cfg, cfg.codec.dataset);
  require(manifest_path, "dataset manifest");
  rec.input(manifest_path);
  const DatasetManifest m = read_manifest(manifest_path);
  if (m.entries.empty()) throw Error(ErrorCode::kEmptyInput, "dataset manifest has no entries", manifest_path.string());

  CodecTrainConfig tc = cfg.codec.train;
  const PressureSequence probe = load_entry(m, m.entries.front());
  tc.geometry.height = probe.height();
  tc.geometry.width = probe.width();
  tc.validate();

  const fs::path dir = cfg.stage_dir("train-codec");
  ensure_directory(dir);
  if (cfg.codec.kfold) {
    const auto data = load_normalized(m, training_entries(m));
    const auto folds = train_codec_kfold(data, tc);
    json per_fold = json::array();
    std::size_t best = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const fs::path csv = dir / fmt::format("fold_{:02d}_loss.csv", f);
      write_codec_csv(csv, folds[f].result.history);
      rec.output(csv);
      per_fold.push_back(validation_json(folds[f].result));
      if (folds[f].result.best_validation < folds[best].result.best_validation) best = f;
    }
    folds[best].result.model.save(cfg.codec_checkpoint());
    rec.summary = {{"folds", per_fold}, {"checkpoint_fold", best}};
    ctx.out << fmt::format("k-fold: {} folds, best fold {} (validation MSE {:.6g})\n", folds.size(), best,
                           folds[best].result.best_validation);
  } else {
    const CodecTrainResult r = train_codec(m, tc);
    r.model.save(cfg.codec_checkpoint());
    write_codec_csv(dir / "loss.csv", r.history);
    rec.output(dir / "loss.csv");
    rec.summary = validation_json(r);
    ctx.out << fmt::format("codec trained for {} steps; best validation MSE {:.6g} at step {}\n", r.history.size(),
                           r.best_validation, r.best_step);
  }
  rec.output(cfg.codec_checkpoint());
  const fs::path summary = dir / "summary.json";
  write_text_file(summary, rec.summary.dump(2) + "\n");
  rec.output(summary);
}

void cmd_train_generator(const CommandContext& ctx, CommandRecord& rec) {
  const RunConfig& cfg = ctx.config;
  const fs::path manifest_path = dataset_path(cfg, cfg.generator.dataset);
  const fs::path codec_file = codec_path(cfg);
  require(manifest_path, "dataset manifest");
  require(codec_file, "codec checkpoint");
  rec.input(manifest_path);
  rec.input(codec_file);

  const CodecModel codec = CodecModel::load(codec_file);
  const DatasetManifest m = read_manifest(manifest_path);
  std::vector<TextSequencePair> pairs;
  for (const auto& e : training_entries(m)) pairs.push_back({e.description, normalize(load_entry(m, e))});
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "no training sequences in the dataset", manifest_path.string());

  GeneratorTrainConfig tc = cfg.generator.train;
  tc.validate(codec.geometry().codebook_size);
  const auto embedder = cfg.make_embedder();
  GeneratorTrainResult r = train_generator(pairs, codec, *embedder, tc);
  r.model.codec_hash = file_content_hash(codec_file);

  const fs::path dir = cfg.stage_dir("train-generator");
  ensure_directory(dir);
  r.model.save(cfg.generator_checkpoint());
  rec.output(cfg.generator_checkpoint());
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < r.loss_history.size(); ++i) csv += fmt::format("{},{:.17g}\n", i, r.loss_history[i]);
  write_text_file(dir / "loss.csv", csv);
  rec.output(dir / "loss.csv");

  const double final_loss = r.loss_history.empty() ? 0.0 : r.loss_history.back();
  rec.summary = {{"pairs", pairs.size()}, {"steps", r.loss_history.size()}, {"final_loss", final_loss},
                 {"embedding_provider", r.model.embedding_provider}};
  ctx.out << fmt::format("generator trained on {} pairs for {} steps; final loss {:.6g}\n", pairs.size(),
                         r.loss_history.size(), final_loss);
}

void cmd_generate(const CommandContext& ctx, CommandRecord& rec) {
  const RunConfig& cfg = ctx.config;
  const GenerateSection& g = cfg.generate;
  const fs::path codec_file = codec_path(cfg);
  require(cfg.generator_checkpoint(), "generator checkpoint");
  require(codec_file, "codec checkpoint");
  rec.input(cfg.generator_checkpoint());
  rec.input(codec_file);

  const GeneratorModel model = GeneratorModel::load(cfg.generator_checkpoint());
  const CodecModel codec = CodecModel::load(codec_file);
  model.check_codec(file_content_hash(codec_file));
  const auto embedder = cfg.make_embedder();
  if (embedder->name() != model.embedding_provider) {
    throw Error(ErrorCode::kArtifactMismatch, "generator was trained with embedding provider '" +
                                                  model.embedding_provider + "' but '" + embedder->name() +
                                                  "' is configured");
  }

  std::vector<Prompt> prompts;
  if (g.from_split) {
    require(cfg.dataset_manifest(), "dataset manifest");
    rec.input(cfg.dataset_manifest());
    const DatasetManifest m = read_manifest(cfg.dataset_manifest());
    for (const auto& e : m.entries_in(*g.from_split)) prompts.push_back({e.description, e.class_label, e.frames});
  }
  prompts.insert(prompts.end(), g.prompts.begin(), g.prompts.end());
  if (prompts.empty()) throw Error(ErrorCode::kEmptyInput, "no prompts to generate from", "generate.prompts");

  std::vector<PressureSequence> seqs;
  json index = json::array();
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const Prompt& p = prompts[i];
    const TextEmbedding cond = embedder->embed(p.text);
    const ActivityClass label = p.label.value_or(nearest_class(cond, *embedder));
    for (int s = 0; s < g.samples_per_prompt; ++s) {
      const std::uint64_t n = i * static_cast<std::uint64_t>(g.samples_per_prompt) + static_cast<std::uint64_t>(s);
      SamplingConfig sampling = g.sampling;
      sampling.seed = mix_seed(g.sampling.seed, n);
      PressureSequence seq = generate_sequence(model, codec, cond, p.frames > 0 ? p.frames : g.frames, sampling);
      seq.activity_id = fmt::format("gen_{:05d}", n);
      seq.description = p.text;
      seq.class_label = label;
      index.push_back({{"text", p.text},
                       {"file", "sequences/" + seq.activity_id + ".pseq"},
                       {"class_label", std::string(to_string(label))},
                       {"sample", s}});
      seqs.push_back(std::move(seq));
    }
  }

  const fs::path dir = cfg.stage_dir("generate");
  write_dataset(seqs, dir, g.sampling.seed);
  for (const auto& seq : seqs) rec.output(dir / "sequences" / (seq.activity_id + ".pseq"));
  rec.output(cfg.generated_manifest());
  write_text_file(dir / "index.json", index.dump(2) + "\n");
  rec.output(dir / "index.json");
  if (ctx.plot) {
    for (const auto& seq : seqs) plot_sequence(seq, dir / "plots" / seq.activity_id, g.plot_every, rec);
  }
  rec.summary = {{"prompts", prompts.size()},
                 {"sequences", seqs.size()},
                 {"sampling", std::string(to_string(g.sampling.mode))},
                 {"plots", ctx.plot}};
  ctx.out << fmt::format("generated {} sequences from {} prompts into {}\n", seqs.size(), prompts.size(),
                         dir.string());
}

void cmd_evaluate(const CommandContext& ctx, CommandRecord& rec) {
  const RunConfig& cfg = ctx.config;
  const EvaluateSection& e = cfg.evaluate;
  const fs::path ref_path = e.reference.value_or(cfg.dataset_manifest());
  const fs::path gen_path = e.generated.value_or(cfg.generated_manifest());
  require(ref_path, "reference manifest");
  require(gen_path, "generated set manifest");
  rec.input(ref_path);
  rec.input(gen_path);

  const DatasetManifest ref_m = read_manifest(ref_path);
  const DatasetManifest gen_m = read_manifest(gen_path);
  const auto ref_entries = e.reference ? ref_m.entries : ref_m.entries_in(e.reference_split);

  // The j-th reference of a description is paired with the j-th generation
  // of the same description (cycling when there are fewer generations).
  std::map<std::string, std::vector<const ManifestEntry*>> by_text;
  for (const auto& ge : gen_m.entries) by_text[ge.description].push_back(&ge);
  std::map<std::string, std::size_t> used;
  std::vector<PressureSequence> reference, generated;
  std::size_t unmatched = 0;
  for (const auto& re : ref_entries) {
    const auto it = by_text.find(re.description);
    if (it == by_text.end()) {
      ++unmatched;
      continue;
    }
    const ManifestEntry& ge = *it->second[used[re.description]++ % it->second.size()];
    reference.push_back(normalize(load_entry(ref_m, re)));
    generated.push_back(normalize(load_entry(gen_m, ge)));
  }
  if (unmatched > 0) logger()->warn("evaluate: {} reference sequences have no generation with the same text", unmatched);
  if (reference.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no reference sequence shares a description with the generated set",
                gen_path.string());
  }

  FidOptions fo;
  fo.space = e.feature_space;
  fo.pca_components = e.pca_components;
  std::optional<CodecModel> codec;
  if (e.feature_space == FeatureSpace::kCodecLatent) {
    require(codec_path(cfg), "codec checkpoint");
    rec.input(codec_path(cfg));
    codec = CodecModel::load(codec_path(cfg));
    fo.codec = &*codec;
  }
  MetricReport report = evaluate_sets(reference, generated, fo, e.tau);
  report.label = "evaluate";
  const fs::path dir = cfg.stage_dir("evaluate");
  ensure_directory(dir);
  json j = report.to_json();
  j["reference_manifest"] = cfg.display(ref_path);
  j["generated_manifest"] = cfg.display(gen_path);
  write_text_file(dir / "report.json", j.dump(2) + "\n");
  rec.output(dir / "report.json");
  rec.summary = {{"fid", report.fid.value_or(0.0)},
                 {"r2", report.r2.value_or(0.0)},
                 {"binarized_r2", report.binarized_r2.value_or(0.0)},
                 {"pairs", reference.size()}};
  ctx.out << fmt::format("FID {:.6g}  R2 {:.6g}  binarized R2 {:.6g}  ({} pairs, {})\n", report.fid.value_or(0.0),
                         report.r2.value_or(0.0), report.binarized_r2.value_or(0.0), reference.size(),
                         report.feature_space);
}

void cmd_har(const CommandContext& ctx, CommandRecord& rec) {
  const RunConfig& cfg = ctx.config;
  const ExperimentPlan plan = cfg.experiment_plan();
  require(plan.synthetic_manifest, "synthetic manifest");
  require(plan.real_manifest, "real manifest");
  require(plan.evaluation_manifest, "evaluation manifest");
  if (plan.augmented_manifest) require(*plan.augmented_manifest, "augmented manifest");
  rec.input(plan.synthetic_manifest);
  rec.input(plan.real_manifest);
  rec.input(plan.evaluation_manifest);
  if (plan.augmented_manifest) rec.input(*plan.augmented_manifest);

  const fs::path dir = cfg.stage_dir("har");
  const ExperimentResult r = run_experiment(plan, dir / "reports");
  json plan_json = plan.to_json();
  for (const char* key : {"synthetic_manifest", "real_manifest", "augmented_manifest", "evaluation_manifest"}) {
    if (plan_json.contains(key) && plan_json[key].is_string()) plan_json[key] = cfg.display(plan_json[key].get<std::string>());
  }
  write_text_file(dir / "plan.json", plan_json.dump(2) + "\n");
  write_text_file(dir / "aggregates.json", r.to_json().dump(2) + "\n");
  write_text_file(dir / "table.txt", r.table());
  for (const char* name : {"plan.json", "aggregates.json", "table.txt"}) rec.output(dir / name);
  rec.output(dir / "reports");
  json agg = json::array();
  for (const auto& a : r.aggregates) {
    agg.push_back({{"recipe", std::string(to_string(a.recipe))}, {"mean", a.mean}, {"stddev", a.stddev}});
  }
  rec.summary = {{"aggregates", agg}};
  ctx.out << r.table();
}

const std::vector<std::pair<std::string, CommandFn>>& commands() {
  static const std::vector<std::pair<std::string, CommandFn>> kCommands = {
      {"synth", cmd_synth},       {"train-codec", cmd_train_codec}, {"train-generator", cmd_train_generator},
      {"generate", cmd_generate}, {"evaluate", cmd_evaluate},       {"har", cmd_har},
  };
  return kCommands;
}

}  // namespace pressgen::cli
