// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "pressgen/har.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pressgen/error.hpp"
#include "pressgen/hash.hpp"
#include "pressgen/io_util.hpp"
#include "pressgen/log.hpp"

namespace pressgen {

using nn::Matrix;
using nn::Vector;
using nlohmann::json;

std::vector<std::string> activity_class_names() {
  std::vector<std::string> names;
  for (ActivityClass c : kAllActivityClasses) names.emplace_back(to_string(c));
  return names;
}

// ---------------------------------------------------------------------------
// Windows

std::vector<HarExample> windowize(std::span<const PressureSequence> seqs, std::span<const std::string> ids,
                                  int window_len, int stride) {
  if (window_len < 1 || stride < 1) throw Error(ErrorCode::kInvalidConfig, "window and stride must be >= 1", "har.window");
  if (!ids.empty() && ids.size() != seqs.size()) throw Error(ErrorCode::kDimensionMismatch, "windowize: id count");
  std::vector<HarExample> out;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const std::string id = ids.empty() ? seqs[i].activity_id : ids[i];
    if (seqs[i].frames() < static_cast<std::uint32_t>(window_len)) {
      logger()->warn("sequence {} has {} frames, shorter than the {}-frame window; skipped", id, seqs[i].frames(),
                     window_len);
      continue;
    }
    const PressureSequence seq = seqs[i].normalized ? seqs[i] : normalize(seqs[i]);
    const auto d = static_cast<Eigen::Index>(seq.frame_size());
    for (std::uint32_t start = 0; start + static_cast<std::uint32_t>(window_len) <= seq.frames();
         start += static_cast<std::uint32_t>(stride)) {
      HarExample ex;
      ex.window.resize(d, window_len);
      for (int t = 0; t < window_len; ++t) {
        const auto f = seq.frame(start + static_cast<std::uint32_t>(t));
        for (Eigen::Index c = 0; c < d; ++c) ex.window(c, t) = f[static_cast<std::size_t>(c)];
      }
      ex.label = static_cast<int>(seq.class_label);
      ex.sequence_id = id;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::vector<HarExample> windowize(const DatasetManifest& manifest, int window_len, int stride) {
  std::vector<PressureSequence> seqs;
  std::vector<std::string> ids;
  for (const auto& e : manifest.entries) {
    seqs.push_back(load_entry(manifest, e));
    ids.push_back(std::filesystem::weakly_canonical(manifest.resolve(e)).string());
  }
  return windowize(seqs, ids, window_len, stride);
}

void HarConfig::validate() const {
  auto fail = [](const char* field, const char* what) { throw Error(ErrorCode::kInvalidConfig, what, field); };
  if (window < 1) fail("har.window", "must be >= 1");
  if (stride < 1) fail("har.stride", "must be >= 1");
  if (hidden < 1) fail("har.hidden", "must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) fail("har.kernel", "must be odd and >= 1");
  if (epochs < 1) fail("har.epochs", "must be >= 1");
  if (batch_size < 1) fail("har.batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) fail("har.learning_rate", "must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) fail("har.val_fraction", "must be in [0, 1)");
  if (patience < 0) fail("har.patience", "must be >= 0");
}

// ---------------------------------------------------------------------------
// Model

HarModel::HarModel(int channels, int window, int hidden, int kernel, std::vector<std::string> class_names,
                   std::uint64_t seed)
    : channels_(channels),
      window_(window),
      hidden_(hidden),
      kernel_(kernel),
      class_names_(std::move(class_names)),
      conv1_("conv1", channels, hidden, kernel, 1, kernel / 2),
      conv2_("conv2", hidden, hidden, kernel, 1, kernel / 2),
      head_("head", hidden, static_cast<int>(class_names_.size())) {
  if (class_names_.empty()) throw Error(ErrorCode::kInvalidArgument, "HAR model needs at least one class");
  Rng rng(seed);
  conv1_.init(rng);
  conv2_.init(rng);
  head_.init(rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
}

Vector HarModel::logits(const Matrix& window) const {
  if (window.rows() != channels_) throw Error(ErrorCode::kDimensionMismatch, "HAR window channel count");
  const Matrix h1 = nn::relu(conv1_.forward(window, nullptr));
  const Matrix h2 = nn::relu(conv2_.forward(h1, nullptr));
  const Matrix pooled = h2.rowwise().mean();
  return head_.forward(pooled).col(0);
}

int HarModel::predict(const Matrix& window) const {
  const Vector l = logits(window);
  Eigen::Index arg = 0;
  l.maxCoeff(&arg);
  return static_cast<int>(arg);
}

double HarModel::batch_loss(std::span<const HarExample* const> batch, bool train) {
  double loss = 0.0;
  const double n = static_cast<double>(batch.size());
  for (const HarExample* ex : batch) {
    nn::ConvTrace t1, t2;
    const Matrix a1 = conv1_.forward(ex->window, train ? &t1 : nullptr);
    const Matrix h1 = nn::relu(a1);
    const Matrix a2 = conv2_.forward(h1, train ? &t2 : nullptr);
    const Matrix h2 = nn::relu(a2);
    const Matrix pooled = h2.rowwise().mean();
    const Matrix logit = head_.forward(pooled);
    const int target = ex->label;
    Matrix dlogit;
    loss += nn::cross_entropy(logit, std::span<const int>(&target, 1), train ? &dlogit : nullptr, 1.0 / n);
    if (!train) continue;
    const Matrix dpooled = head_.backward(dlogit, pooled);
    Matrix dh2 = dpooled.replicate(1, h2.cols()) / static_cast<double>(h2.cols());
    const Matrix dh1 = conv2_.backward(nn::relu_backward(dh2, a2), t2);
    conv1_.backward(nn::relu_backward(dh1, a1), t1);
  }
  return loss / n;
}

nn::ParameterList HarModel::parameters() {
  nn::ParameterList p;
  conv1_.collect(p);
  conv2_.collect(p);
  head_.collect(p);
  return p;
}

nn::CheckpointContainer HarModel::to_checkpoint() const {
  nn::CheckpointContainer ckpt;
  ckpt.kind = std::string(kCheckpointKind);
  ckpt.header_json = json{{"channels", channels_},
                          {"window", window_},
                          {"hidden", hidden_},
                          {"kernel", kernel_},
                          {"classes", class_names_}}
                         .dump();
  nn::store_parameters(const_cast<HarModel*>(this)->parameters(), ckpt);
  return ckpt;
}

HarModel HarModel::from_checkpoint(const nn::CheckpointContainer& ckpt) {
  if (ckpt.kind != kCheckpointKind) throw Error(ErrorCode::kArtifactMismatch, "not a HAR checkpoint");
  json h;
  try {
    h = json::parse(ckpt.header_json);
    HarModel m(h.at("channels"), h.at("window"), h.at("hidden"), h.at("kernel"),
               h.at("classes").get<std::vector<std::string>>(), 0);
    nn::restore_parameters(m.parameters(), ckpt);
    return m;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kMalformedResponse, std::string("HAR checkpoint header: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Training and evaluation

namespace {

void check_uniform(std::span<const HarExample> examples, Eigen::Index rows, Eigen::Index cols) {
  for (const auto& ex : examples) {
    if (ex.window.rows() != rows || ex.window.cols() != cols) {
      throw Error(ErrorCode::kDimensionMismatch, "HAR windows differ in shape");
    }
  }
}

}  // namespace

HarTrainResult train_har(std::span<const HarExample> examples, const HarConfig& cfg) {
  cfg.validate();
  if (examples.empty()) throw Error(ErrorCode::kEmptyInput, "train_har: no examples");
  const auto names = activity_class_names();
  std::set<int> present;
  for (const auto& ex : examples) {
    if (ex.label < 0 || ex.label >= static_cast<int>(names.size())) {
      throw Error(ErrorCode::kOutOfRange, "train_har: label outside the class set");
    }
    present.insert(ex.label);
  }
  if (present.size() < 2) throw Error(ErrorCode::kInvalidArgument, "train_har: need at least two classes");
  const Eigen::Index rows = examples.front().window.rows(), cols = examples.front().window.cols();
  check_uniform(examples, rows, cols);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(mix_seed(cfg.seed, 21));
  split_rng.shuffle(order.begin(), order.end());
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(order.size())));
  if (n_val >= order.size()) n_val = order.size() - 1;
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  HarModel model(static_cast<int>(rows), static_cast<int>(cols), cfg.hidden, cfg.kernel, names,
                 mix_seed(cfg.seed, 22));
  nn::ParameterList params = model.parameters();
  nn::Adam adam(params);
  Rng rng(mix_seed(cfg.seed, 23));

  HarTrainResult result{model, {}, {}, 0};
  double best_f1 = -1.0, best_val_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(train_idx.begin(), train_idx.end());
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const HarExample*> batch;
      for (std::size_t i = start; i < std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++i) {
        batch.push_back(&examples[train_idx[i]]);
      }
      nn::zero_grad(params);
      const double loss = model.batch_loss(batch, true);
      if (!std::isfinite(loss)) throw Error(ErrorCode::kNumerical, "train_har: non-finite loss");
      nn::clip_grad_norm(params, 1.0);
      adam.step(cfg.learning_rate);
      epoch_loss += loss;
      ++batches;
    }
    result.train_loss.push_back(epoch_loss / batches);
    if (val_idx.empty()) {
      result.model = model;
      result.best_epoch = epoch;
      continue;
    }
    std::vector<int> pred, truth;
    std::vector<const HarExample*> val_batch;
    for (std::size_t i : val_idx) {
      pred.push_back(model.predict(examples[i].window));
      truth.push_back(examples[i].label);
      val_batch.push_back(&examples[i]);
    }
    const double f1 = macro_f1(pred, truth, static_cast<int>(names.size())).macro_f1;
    const double val_loss = model.batch_loss(val_batch, false);
    result.validation_f1.push_back(f1);
    if (f1 > best_f1 || (f1 == best_f1 && val_loss < best_val_loss)) {
      best_f1 = f1;
      best_val_loss = val_loss;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

MetricReport eval_har(const HarModel& model, std::span<const HarExample> examples) {
  if (examples.empty()) throw Error(ErrorCode::kEmptyInput, "eval_har: no examples");
  std::vector<int> pred, truth;
  for (const auto& ex : examples) {
    if (ex.window.rows() != model.channels() || ex.window.cols() != model.window()) {
      throw Error(ErrorCode::kDimensionMismatch, "eval_har: window geometry does not match the model");
    }
    if (ex.label < 0 || ex.label >= model.num_classes()) {
      throw Error(ErrorCode::kArtifactMismatch, "eval_har: label " + std::to_string(ex.label) + " unknown to the model");
    }
    pred.push_back(model.predict(ex.window));
    truth.push_back(ex.label);
  }
  const F1Result f1 = macro_f1(pred, truth, model.num_classes());
  MetricReport r;
  r.macro_f1 = f1.macro_f1;
  r.per_class_f1 = f1.per_class;
  r.class_names = model.class_names();
  for (int c : f1.absent_classes) r.conventional_f1_classes.push_back(model.class_names()[static_cast<std::size_t>(c)]);
  r.generated_count = examples.size();
  return r;
}

// ---------------------------------------------------------------------------
// Experiments

std::string_view to_string(Recipe r) {
  switch (r) {
    case Recipe::kSyntheticOnly: return "synthetic-only";
    case Recipe::kRealOnly: return "real-only";
    case Recipe::kCombined: return "combined";
    case Recipe::kCombinedWithAugmented: return "combined-with-augmented";
  }
  return "unknown";
}

Recipe parse_recipe(std::string_view name) {
  for (Recipe r : {Recipe::kSyntheticOnly, Recipe::kRealOnly, Recipe::kCombined, Recipe::kCombinedWithAugmented}) {
    if (name == to_string(r)) return r;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown recipe '" + std::string(name) + "'", "har.recipes");
}

ExperimentPlan ExperimentPlan::from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentPlan p;
  auto path = [&](const char* key) -> std::filesystem::path {
    if (!j.contains(key) || j[key].is_null()) return {};
    if (!j[key].is_string()) throw Error(ErrorCode::kInvalidConfig, "must be a path string", std::string("har.") + key);
    const std::filesystem::path v = j[key].get<std::string>();
    return v.is_absolute() ? v : base_dir / v;
  };
  try {
    p.synthetic_manifest = path("synthetic_manifest");
    p.real_manifest = path("real_manifest");
    p.evaluation_manifest = path("evaluation_manifest");
    if (auto aug = path("augmented_manifest"); !aug.empty()) p.augmented_manifest = aug;
    if (j.contains("recipes")) {
      p.recipes.clear();
      for (const auto& r : j.at("recipes")) p.recipes.push_back(parse_recipe(r.get<std::string>()));
    }
    p.repetitions = j.value("repetitions", p.repetitions);
    p.base_seed = j.value("base_seed", p.base_seed);
    HarConfig& h = p.har;
    h.window = j.value("window", h.window);
    h.stride = j.value("stride", h.stride);
    h.hidden = j.value("hidden", h.hidden);
    h.kernel = j.value("kernel", h.kernel);
    h.epochs = j.value("epochs", h.epochs);
    h.batch_size = j.value("batch_size", h.batch_size);
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.val_fraction = j.value("val_fraction", h.val_fraction);
    h.patience = j.value("patience", h.patience);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidConfig, ex.what(), "har");
  }
  return p;
}

json ExperimentPlan::to_json() const {
  json recipes_json = json::array();
  for (Recipe r : recipes) recipes_json.push_back(std::string(to_string(r)));
  return {
      {"synthetic_manifest", synthetic_manifest.string()},
      {"real_manifest", real_manifest.string()},
      {"augmented_manifest", augmented_manifest ? json(augmented_manifest->string()) : json(nullptr)},
      {"evaluation_manifest", evaluation_manifest.string()},
      {"recipes", recipes_json},
      {"repetitions", repetitions},
      {"base_seed", base_seed},
      {"window", har.window},
      {"stride", har.stride},
      {"hidden", har.hidden},
      {"kernel", har.kernel},
      {"epochs", har.epochs},
      {"batch_size", har.batch_size},
      {"learning_rate", har.learning_rate},
      {"val_fraction", har.val_fraction},
      {"patience", har.patience},
  };
}

void ExperimentPlan::validate() const {
  har.validate();
  if (recipes.empty()) throw Error(ErrorCode::kInvalidConfig, "plan has no recipes", "har.recipes");
  if (repetitions < 1) throw Error(ErrorCode::kInvalidConfig, "must be >= 1", "har.repetitions");
  if (evaluation_manifest.empty()) throw Error(ErrorCode::kInvalidConfig, "missing", "har.evaluation_manifest");
  for (Recipe r : recipes) {
    const bool needs_synth = r != Recipe::kRealOnly;
    const bool needs_real = r != Recipe::kSyntheticOnly;
    if (needs_synth && synthetic_manifest.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "required by recipe " + std::string(to_string(r)), "har.synthetic_manifest");
    }
    if (needs_real && real_manifest.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "required by recipe " + std::string(to_string(r)), "har.real_manifest");
    }
    if (r == Recipe::kCombinedWithAugmented && !augmented_manifest) {
      throw Error(ErrorCode::kInvalidConfig, "required by recipe combined-with-augmented", "har.augmented_manifest");
    }
  }
}

LabeledSet load_labeled_set(const std::filesystem::path& manifest_path) {
  const DatasetManifest m = read_manifest(manifest_path);
  LabeledSet s;
  for (const auto& e : m.entries) {
    s.sequences.push_back(load_entry(m, e));
    s.ids.push_back(std::filesystem::weakly_canonical(m.resolve(e)).string());
  }
  return s;
}

namespace {

std::vector<const LabeledSet*> training_sets(const ExperimentData& data, Recipe r) {
  switch (r) {
    case Recipe::kSyntheticOnly: return {&data.synthetic};
    case Recipe::kRealOnly: return {&data.real};
    case Recipe::kCombined: return {&data.synthetic, &data.real};
    case Recipe::kCombinedWithAugmented:
      if (!data.augmented) throw Error(ErrorCode::kInvalidConfig, "recipe needs an augmented set", "har.augmented_manifest");
      return {&data.synthetic, &data.real, &*data.augmented};
  }
  return {};
}

}  // namespace

void check_no_leakage(const ExperimentData& data, std::span<const Recipe> recipes) {
  const std::set<std::string> eval_ids(data.evaluation.ids.begin(), data.evaluation.ids.end());
  for (Recipe r : recipes) {
    for (const LabeledSet* s : training_sets(data, r)) {
      for (const auto& id : s->ids) {
        if (eval_ids.count(id)) {
          throw Error(ErrorCode::kLeakage, "sequence " + id + " is in both the " + std::string(to_string(r)) +
                                               " training set and the evaluation set");
        }
      }
    }
  }
}

ExperimentResult run_experiment(const ExperimentData& data, std::span<const Recipe> recipes, int repetitions,
                                std::uint64_t base_seed, const HarConfig& cfg) {
  cfg.validate();
  if (repetitions < 1) throw Error(ErrorCode::kInvalidConfig, "must be >= 1", "har.repetitions");
  check_no_leakage(data, recipes);
  const auto eval = windowize(data.evaluation.sequences, data.evaluation.ids, cfg.window, cfg.stride);
  if (eval.empty()) throw Error(ErrorCode::kEmptyInput, "evaluation set yields no windows");

  ExperimentResult result;
  for (Recipe r : recipes) {
    std::vector<HarExample> train;
    for (const LabeledSet* s : training_sets(data, r)) {
      auto w = windowize(s->sequences, s->ids, cfg.window, cfg.stride);
      std::move(w.begin(), w.end(), std::back_inserter(train));
    }
    std::vector<double> scores;
    for (int rep = 0; rep < repetitions; ++rep) {
      HarConfig run_cfg = cfg;
      run_cfg.seed = mix_seed(base_seed, static_cast<std::uint64_t>(rep));
      const HarTrainResult trained = train_har(train, run_cfg);
      MetricReport report = eval_har(trained.model, eval);
      report.label = fmt::format("{}/rep{}", to_string(r), rep);
      report.reference_count = train.size();
      scores.push_back(*report.macro_f1);
      result.reports.push_back(std::move(report));
    }
    RecipeAggregate agg;
    agg.recipe = r;
    agg.runs = static_cast<int>(scores.size());
    agg.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / agg.runs;
    double ss = 0.0;
    for (double s : scores) ss += (s - agg.mean) * (s - agg.mean);
    agg.stddev = agg.runs > 1 ? std::sqrt(ss / (agg.runs - 1)) : 0.0;
    result.aggregates.push_back(agg);
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentPlan& plan, const std::filesystem::path& report_dir) {
  plan.validate();
  ExperimentData data;
  bool need_synth = false, need_real = false;
  for (Recipe r : plan.recipes) {
    need_synth |= r != Recipe::kRealOnly;
    need_real |= r != Recipe::kSyntheticOnly;
  }
  data.evaluation = load_labeled_set(plan.evaluation_manifest);
  if (need_synth) data.synthetic = load_labeled_set(plan.synthetic_manifest);
  if (need_real) data.real = load_labeled_set(plan.real_manifest);
  if (plan.augmented_manifest) data.augmented = load_labeled_set(*plan.augmented_manifest);
  ExperimentResult result = run_experiment(data, plan.recipes, plan.repetitions, plan.base_seed, plan.har);
  if (!report_dir.empty()) {
    ensure_directory(report_dir);
    for (const auto& r : result.reports) {
      std::string name = r.label;
      std::replace(name.begin(), name.end(), '/', '_');
      write_text_file(report_dir / (name + ".json"), r.to_json().dump(2) + "\n");
    }
    write_text_file(report_dir / "aggregates.json", result.to_json().dump(2) + "\n");
  }
  return result;
}

json ExperimentResult::to_json() const {
  json aggs = json::array();
  for (const auto& a : aggregates) {
    aggs.push_back({{"recipe", std::string(to_string(a.recipe))}, {"mean_macro_f1", a.mean}, {"std_macro_f1", a.stddev},
                    {"runs", a.runs}});
  }
  json reps = json::array();
  for (const auto& r : reports) reps.push_back(r.to_json());
  return {{"aggregates", aggs}, {"reports", reps}};
}

std::string ExperimentResult::table() const {
  std::ostringstream os;
  os << fmt::format("{:<26} {:>8}   {:>6}\n", "recipe", "macro_f1", "std");
  for (const auto& a : aggregates) {
    os << fmt::format("{:<26} {:>8.3f} +/- {:.3f}\n", to_string(a.recipe), a.mean, a.stddev);
  }
  return os.str();
}

}  // namespace pressgen
