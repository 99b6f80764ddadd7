// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <set>

#include "pressgen/error.hpp"
#include "pressgen/hash.hpp"

namespace pressgen::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kInvalidConfig, field + ": " + what, field);
}

// Typed reads from one config section; unknown keys are rejected on finish().
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      j_ = doc.at(name_);
      if (!j_.is_object()) invalid(name_, "must be an object");
    }
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      invalid(field(key), "has the wrong type");
    }
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return name_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) invalid(field(key), "unknown key");
    }
  }

 private:
  std::string name_;
  json j_ = json::object();
  std::set<std::string> used_;
};

template <typename F>
void validated(F&& f, const std::string& section) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidConfig) {
      // Config keys are flat within a section.
      std::string inner = e.field();
      for (const char* nested : {"geometry.", "architecture.", "schedule.", "model."}) {
        if (inner.rfind(nested, 0) == 0) inner.erase(0, std::string_view(nested).size());
      }
      const std::string field = inner.empty()                          ? section
                                : inner.rfind(section + ".", 0) == 0    ? inner
                                                                        : section + "." + inner;
      throw Error(ErrorCode::kInvalidConfig, e.what(), field);
    }
    throw;
  }
}

void parse_synth(const json& doc, RunConfig& rc) {
  Section s(doc, "synth");
  SynthConfig& d = rc.synth.dataset;
  d.sequences_per_class = s.get("sequences_per_class", d.sequences_per_class);
  d.frames_per_sequence = s.get("frames_per_sequence", d.frames_per_sequence);
  d.height = s.get("height", d.height);
  d.width = s.get("width", d.width);
  d.descriptions_per_class = s.get("descriptions_per_class", d.descriptions_per_class);
  d.subjects = s.get("subjects", d.subjects);
  if (s.has("classes")) {
    d.classes.clear();
    for (const auto& name : s.get<std::vector<std::string>>("classes", {})) {
      try {
        d.classes.push_back(parse_activity_class(name));
      } catch (const Error& e) {
        invalid(s.field("classes"), e.what());
      }
    }
  }
  d.seed = mix_seed(rc.seed, kSaltDataset);
  if (s.has("split")) {
    const auto v = s.get<std::vector<double>>("split", {});
    if (v.size() != 3) invalid(s.field("split"), "needs three fractions (train, test, val)");
    rc.synth.split = {v[0], v[1], v[2]};
    try {
      allocate_counts(100, rc.synth.split);
    } catch (const Error& e) {
      invalid(s.field("split"), e.what());
    }
  }
  rc.synth.real_sequences_per_class = s.get("real_sequences_per_class", rc.synth.real_sequences_per_class);
  rc.synth.eval_sequences_per_class = s.get("eval_sequences_per_class", rc.synth.eval_sequences_per_class);
  rc.synth.gap.multiplicative_noise = s.get("noise", rc.synth.gap.multiplicative_noise);
  rc.synth.gap.floor_mmhg = s.get("floor_mmhg", rc.synth.gap.floor_mmhg);
  s.finish();

  validated([&] { d.validate(); }, "synth");
  if (rc.synth.real_sequences_per_class < 1) invalid("synth.real_sequences_per_class", "must be >= 1");
  if (rc.synth.eval_sequences_per_class < 1) invalid("synth.eval_sequences_per_class", "must be >= 1");
  if (!(rc.synth.gap.multiplicative_noise >= 0.0 && rc.synth.gap.multiplicative_noise < 1.0)) {
    invalid("synth.noise", "must be in [0, 1)");
  }
  if (!(rc.synth.gap.floor_mmhg >= 0.0 && rc.synth.gap.floor_mmhg < kSensorCeilingMmHg)) {
    invalid("synth.floor_mmhg", "must be in [0, 5000)");
  }
}

void parse_embedding(const json& doc, RunConfig& rc) {
  Section s(doc, "embedding");
  EmbeddingSection& e = rc.embedding;
  e.provider = s.get("provider", e.provider);
  e.dim = s.get("dim", e.dim);
  e.hash_seed = s.get("seed", e.hash_seed);
  e.remote.url = s.get("url", e.remote.url);
  e.remote.timeout = std::chrono::milliseconds(s.get<std::int64_t>("timeout_ms", e.remote.timeout.count()));
  if (s.has("cache_dir")) e.cache_dir = rc.resolve(s.get<std::string>("cache_dir", ""));
  s.finish();
  e.remote = e.remote.with_env();
  e.remote.dim = e.dim;
  if (e.provider != "hash" && e.provider != "remote") invalid("embedding.provider", "must be 'hash' or 'remote'");
  if (e.dim < 1) invalid("embedding.dim", "must be >= 1");
  if (e.provider == "remote" && e.remote.url.empty()) {
    invalid("embedding.url", std::string("required for the remote provider (or set ") + RemoteProviderConfig::kUrlEnv +
                                 ")");
  }
  if (e.remote.timeout.count() < 1) invalid("embedding.timeout_ms", "must be >= 1");
}

void parse_codec(const json& doc, RunConfig& rc) {
  Section s(doc, "codec");
  CodecTrainConfig& c = rc.codec.train;
  c.geometry.height = rc.synth.dataset.height;
  c.geometry.width = rc.synth.dataset.width;
  c.geometry.downsample = s.get("downsample", c.geometry.downsample);
  c.geometry.latent_dim = s.get("latent_dim", c.geometry.latent_dim);
  c.geometry.codebook_size = s.get("codebook_size", c.geometry.codebook_size);
  c.architecture.hidden = s.get("hidden", c.architecture.hidden);
  c.architecture.residual_blocks = s.get("residual_blocks", c.architecture.residual_blocks);
  c.architecture.residual = s.get("residual", c.architecture.residual);
  c.annealing = s.get("annealing", c.annealing);
  c.ema = s.get("ema", c.ema);
  c.ema_horizon = s.get("ema_horizon", c.ema_horizon);
  c.schedule.warmup_steps = s.get("warmup_steps", c.schedule.warmup_steps);
  c.schedule.w_r_start = s.get("w_r_start", c.schedule.w_r_start);
  c.schedule.w_r_end = s.get("w_r_end", c.schedule.w_r_end);
  c.schedule.w_q_start = s.get("w_q_start", c.schedule.w_q_start);
  c.schedule.w_q_end = s.get("w_q_end", c.schedule.w_q_end);
  c.steps = s.get("steps", c.steps);
  c.batch_size = s.get("batch_size", c.batch_size);
  c.learning_rate = s.get("learning_rate", c.learning_rate);
  c.lr_decay = s.get("lr_decay", c.lr_decay);
  c.lr_decay_every = s.get("lr_decay_every", c.lr_decay_every);
  c.grad_clip = s.get("grad_clip", c.grad_clip);
  c.eval_every = s.get("eval_every", c.eval_every);
  c.patience = s.get("patience", c.patience);
  c.val_fraction = s.get("val_fraction", c.val_fraction);
  c.folds = s.get("folds", c.folds);
  rc.codec.kfold = s.get("kfold", rc.codec.kfold);
  if (s.has("dataset")) rc.codec.dataset = rc.resolve(s.get<std::string>("dataset", ""));
  c.seed = mix_seed(rc.seed, kSaltCodec);
  s.finish();
  validated([&] { c.validate(); }, "codec");
}

SamplingConfig parse_sampling(Section& s, SamplingConfig sc) {
  if (!s.has("sampling")) return sc;
  const json& j = s.raw("sampling");
  if (!j.is_object()) invalid(s.field("sampling"), "must be an object");
  const std::string field = s.field("sampling");
  try {
    if (j.contains("mode")) sc.mode = parse_sampling_mode(j.at("mode").get<std::string>());
    sc.top_k = j.value("top_k", sc.top_k);
    sc.temperature = j.value("temperature", sc.temperature);
  } catch (const json::exception&) {
    invalid(field, "has a field of the wrong type");
  } catch (const Error& e) {
    invalid(field + ".mode", e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "mode" && key != "top_k" && key != "temperature") invalid(field + "." + key, "unknown key");
  }
  return sc;
}

void parse_generator(const json& doc, RunConfig& rc) {
  Section s(doc, "generator");
  GeneratorTrainConfig& g = rc.generator.train;
  g.model.layers = s.get("layers", g.model.layers);
  g.model.heads = s.get("heads", g.model.heads);
  g.model.width = s.get("width", g.model.width);
  g.model.max_len = s.get("max_len", g.model.max_len);
  g.model.continuous = s.get("continuous", g.model.continuous);
  g.model.cond_dim = rc.embedding.dim;
  g.steps = s.get("steps", g.steps);
  g.batch_size = s.get("batch_size", g.batch_size);
  g.learning_rate = s.get("learning_rate", g.learning_rate);
  g.weight_decay = s.get("weight_decay", g.weight_decay);
  g.grad_clip = s.get("grad_clip", g.grad_clip);
  g.warmup_steps = s.get("warmup_steps", g.warmup_steps);
  if (s.has("dataset")) rc.generator.dataset = rc.resolve(s.get<std::string>("dataset", ""));
  if (s.has("codec")) rc.generator.codec = rc.resolve(s.get<std::string>("codec", ""));
  g.seed = mix_seed(rc.seed, kSaltGenerator);
  s.finish();
  validated([&] { g.validate(rc.codec.train.geometry.codebook_size); }, "generator");
}

void parse_generate(const json& doc, RunConfig& rc) {
  Section s(doc, "generate");
  GenerateSection& g = rc.generate;
  if (s.has("prompts")) {
    const json& arr = s.raw("prompts");
    if (!arr.is_array()) invalid("generate.prompts", "must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string field = "generate.prompts[" + std::to_string(i) + "]";
      const json& p = arr[i];
      Prompt prompt;
      try {
        if (p.is_string()) {
          prompt.text = p.get<std::string>();
        } else if (p.is_object()) {
          prompt.text = p.at("text").get<std::string>();
          if (p.contains("class_label")) prompt.label = parse_activity_class(p.at("class_label").get<std::string>());
          prompt.frames = p.value("frames", 0u);
        } else {
          invalid(field, "must be a string or an object with 'text'");
        }
      } catch (const json::exception&) {
        invalid(field, "needs a string 'text'");
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kInvalidConfig) throw;
        invalid(field + ".class_label", e.what());
      }
      if (canonical_text(prompt.text).empty()) invalid(field, "text must not be blank");
      g.prompts.push_back(std::move(prompt));
    }
  }
  if (s.has("from_split")) {
    try {
      g.from_split = parse_split(s.get<std::string>("from_split", ""));
    } catch (const Error& e) {
      invalid("generate.from_split", e.what());
    }
  }
  g.samples_per_prompt = s.get("samples_per_prompt", g.samples_per_prompt);
  g.frames = s.get("frames", g.frames);
  g.sampling = parse_sampling(s, g.sampling);
  g.sampling.seed = mix_seed(rc.seed, kSaltSampling);
  g.plot_every = s.get("plot_every", g.plot_every);
  s.finish();
  if (g.prompts.empty() && !g.from_split) g.from_split = Split::kTest;
  if (g.samples_per_prompt < 1) invalid("generate.samples_per_prompt", "must be >= 1");
  if (g.frames < 1) invalid("generate.frames", "must be >= 1");
  if (g.plot_every < 1) invalid("generate.plot_every", "must be >= 1");
  if (g.sampling.top_k < 1 || g.sampling.top_k > rc.codec.train.geometry.codebook_size + 1) {
    invalid("generate.sampling.top_k", "must be in [1, K + 1]");
  }
  if (!(g.sampling.temperature > 0.0)) invalid("generate.sampling.temperature", "must be > 0");
}

void parse_evaluate(const json& doc, RunConfig& rc) {
  Section s(doc, "evaluate");
  EvaluateSection& e = rc.evaluate;
  try {
    if (s.has("reference_split")) e.reference_split = parse_split(s.get<std::string>("reference_split", ""));
  } catch (const Error& ex) {
    invalid("evaluate.reference_split", ex.what());
  }
  if (s.has("reference")) e.reference = rc.resolve(s.get<std::string>("reference", ""));
  if (s.has("generated")) e.generated = rc.resolve(s.get<std::string>("generated", ""));
  try {
    if (s.has("feature_space")) e.feature_space = parse_feature_space(s.get<std::string>("feature_space", ""));
  } catch (const Error& ex) {
    invalid("evaluate.feature_space", ex.what());
  }
  e.pca_components = s.get("pca_components", e.pca_components);
  e.tau = s.get("tau", e.tau);
  s.finish();
  if (e.pca_components < 1) invalid("evaluate.pca_components", "must be >= 1");
  if (!(e.tau > 0.0 && e.tau < 1.0)) invalid("evaluate.tau", "must be in (0, 1)");
}

}  // namespace

fs::path RunConfig::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

std::string RunConfig::display(const fs::path& p) const {
  const fs::path rel = p.lexically_normal().lexically_relative(run_dir.lexically_normal());
  if (rel.empty() || *rel.begin() == "..") return p.string();
  return rel.generic_string();
}

fs::path RunConfig::dataset_manifest() const { return stage_dir("synth") / "dataset" / kManifestFileName; }
fs::path RunConfig::codec_checkpoint() const { return stage_dir("train-codec") / "codec.ckpt"; }
fs::path RunConfig::generator_checkpoint() const { return stage_dir("train-generator") / "generator.ckpt"; }
fs::path RunConfig::generated_manifest() const { return stage_dir("generate") / kManifestFileName; }

RunConfig RunConfig::parse(const json& doc, const fs::path& base_dir, std::optional<std::uint64_t> seed_override,
                           const std::optional<fs::path>& run_dir_override) {
  if (!doc.is_object()) invalid("config", "must be a JSON object");
  static const std::set<std::string> kTopLevel = {"seed",      "run_dir",  "synth",    "embedding", "codec",
                                                  "generator", "generate", "evaluate", "har"};
  for (const auto& [key, value] : doc.items()) {
    if (!kTopLevel.count(key)) invalid(key, "unknown section");
  }
  RunConfig rc;
  rc.base_dir = base_dir;
  try {
    rc.seed = doc.value("seed", std::uint64_t{0});
  } catch (const json::exception&) {
    invalid("seed", "must be a non-negative integer");
  }
  if (seed_override) rc.seed = *seed_override;
  if (run_dir_override) {
    rc.run_dir = *run_dir_override;
  } else if (doc.contains("run_dir")) {
    if (!doc.at("run_dir").is_string()) invalid("run_dir", "must be a path string");
    rc.run_dir = rc.resolve(doc.at("run_dir").get<std::string>());
  } else {
    invalid("run_dir", "missing (set it in the config or pass --run-dir)");
  }

  parse_synth(doc, rc);
  parse_embedding(doc, rc);
  parse_codec(doc, rc);
  parse_generator(doc, rc);
  parse_generate(doc, rc);
  parse_evaluate(doc, rc);
  if (doc.contains("har")) {
    if (!doc.at("har").is_object()) invalid("har", "must be an object");
    rc.har = doc.at("har");
  }
  rc.experiment_plan().validate();
  return rc;
}

ExperimentPlan RunConfig::experiment_plan() const {
  json j = har;
  if (!j.contains("synthetic_manifest")) j["synthetic_manifest"] = generated_manifest().string();
  if (!j.contains("real_manifest")) j["real_manifest"] = (stage_dir("synth") / "real" / kManifestFileName).string();
  if (!j.contains("evaluation_manifest")) {
    j["evaluation_manifest"] = (stage_dir("synth") / "real_eval" / kManifestFileName).string();
  }
  if (!j.contains("base_seed")) j["base_seed"] = mix_seed(seed, kSaltHar);
  ExperimentPlan plan;
  validated([&] { plan = ExperimentPlan::from_json(j, base_dir); }, "har");
  validated([&] { plan.validate(); }, "har");
  return plan;
}

std::shared_ptr<const EmbeddingProvider> RunConfig::make_embedder() const {
  std::shared_ptr<const EmbeddingProvider> p;
  if (embedding.provider == "remote") {
    p = std::make_shared<RemoteEmbeddingProvider>(embedding.remote);
  } else {
    p = std::make_shared<HashingEmbeddingProvider>(embedding.dim, embedding.hash_seed);
  }
  if (embedding.cache_dir) p = std::make_shared<CachingProvider>(p, EmbeddingCache(*embedding.cache_dir));
  return p;
}

}  // namespace pressgen::cli
