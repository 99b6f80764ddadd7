// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks for the pipeline. Each criterion prints one PASS/FAIL
// line; the process exits nonzero if any selected criterion fails.
//
//   pressgen_acceptance <id>... | all  [--cli PATH] [--work DIR]

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pressgen/codec.hpp"
#include "pressgen/error.hpp"
#include "pressgen/generator.hpp"
#include "pressgen/har.hpp"
#include "pressgen/hash.hpp"
#include "pressgen/io_util.hpp"
#include "pressgen/log.hpp"
#include "pressgen/metrics.hpp"
#include "pressgen/pressure_data.hpp"
#include "pressgen/random.hpp"
#include "pressgen/text_embedding.hpp"

namespace pressgen::acceptance {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  fs::path cli;
  fs::path work;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------
// Toy corpus: 64 sequences x 120 frames on a 16 x 8 grid, 4 classes.

constexpr int kToyHeight = 16;
constexpr int kToyWidth = 8;
constexpr int kToyPerClass = 16;
constexpr int kToyCodes = 128;
constexpr int kToyLatentDim = 32;

struct ToyCorpus {
  std::vector<PressureSequence> train;  // normalized
  std::vector<PressureSequence> val;
  std::vector<PressureSequence> test;   // fresh oracle draws never seen in training
};

ToyCorpus toy_corpus(std::uint64_t seed, int test_per_class = 2) {
  SynthConfig sc;
  sc.height = kToyHeight;
  sc.width = kToyWidth;
  sc.sequences_per_class = kToyPerClass;
  sc.seed = seed;
  ToyCorpus c;
  const auto raw = synthesize_sequences(sc);
  for (std::size_t i = 0; i < raw.size(); ++i) (i % 8 == 7 ? c.val : c.train).push_back(normalize(raw[i]));
  sc.sequences_per_class = test_per_class;
  sc.seed = mix_seed(seed, 0x7e57);
  for (const auto& s : synthesize_sequences(sc)) c.test.push_back(normalize(s));
  return c;
}

CodecTrainConfig toy_codec_config(std::uint64_t seed) {
  CodecTrainConfig cfg;
  cfg.geometry = {kToyHeight, kToyWidth, 4, kToyLatentDim, kToyCodes};
  cfg.architecture.hidden = 64;
  cfg.steps = 2000;
  cfg.eval_every = 100;
  cfg.patience = 0;
  cfg.schedule.warmup_steps = 500;
  cfg.lr_decay_every = 1000;
  cfg.seed = seed;
  return cfg;
}

// Ablation baseline: no skip connections, fixed loss weights, gradient-learned codebook.
CodecTrainConfig plain_vq(CodecTrainConfig cfg) {
  cfg.architecture.residual = false;
  cfg.annealing = false;
  cfg.ema = false;
  return cfg;
}

GeneratorTrainConfig toy_generator_config(std::uint64_t seed, bool continuous) {
  GeneratorTrainConfig g;
  g.model.layers = 2;
  g.model.heads = 4;
  g.model.width = 64;
  g.model.max_len = 32;
  g.model.continuous = continuous;
  g.steps = 1500;
  g.batch_size = 8;
  g.seed = seed;
  return g;
}

std::vector<TextSequencePair> pairs_of(const std::vector<PressureSequence>& seqs) {
  std::vector<TextSequencePair> pairs;
  for (const auto& s : seqs) pairs.push_back({s.description, s});
  return pairs;
}

std::vector<PressureSequence> generate_for(const GeneratorModel& model, const CodecModel& codec,
                                           const EmbeddingProvider& embedder,
                                           const std::vector<PressureSequence>& prompts) {
  std::vector<PressureSequence> out;
  for (const auto& p : prompts) {
    PressureSequence g = generate_sequence(model, codec, embedder.embed(p.description), p.frames());
    g.description = p.description;
    g.class_label = p.class_label;
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion_1(const Options&) {
  const ToyCorpus c = toy_corpus(1);
  const auto t0 = Clock::now();
  const CodecTrainResult r = train_codec(c.train, c.val, toy_codec_config(3));
  const double secs = seconds_since(t0);
  const double mse = reconstruction_mse(r.model, c.test);
  const bool ok = mse < 0.005 && static_cast<std::int64_t>(r.history.size()) <= 2000 && secs < 600.0;
  return {ok, fmt::format("held-out MSE {:.5f} (< 0.005) after {} steps in {:.1f} s (< 600 s)", mse, r.history.size(),
                          secs)};
}

Outcome criterion_2(const Options&) {
  Rng rng(2);
  long checked = 0, agree = 0, ties = 0;
  while (checked < 10000) {
    const int k = 1 + static_cast<int>(rng.below(512));
    const int d = 1 + static_cast<int>(rng.below(64));
    Codebook cb(k, d, 99);
    for (Eigen::Index i = 0; i < cb.entries.size(); ++i) cb.entries.data()[i] = rng.normal();
    // Duplicated entries force exact ties.
    for (int dup = 0; dup < k / 8; ++dup) {
      cb.entries.col(static_cast<Eigen::Index>(rng.below(k))) = cb.entries.col(static_cast<Eigen::Index>(rng.below(k)));
    }
    LatentSequence lat;
    lat.vectors.resize(d, 500);
    for (Eigen::Index t = 0; t < lat.vectors.cols(); ++t) {
      if (rng.uniform() < 0.2) {
        lat.vectors.col(t) = cb.entries.col(static_cast<Eigen::Index>(rng.below(k)));
      } else {
        for (int j = 0; j < d; ++j) lat.vectors(j, t) = rng.normal();
      }
    }
    const QuantizeResult q = quantize(lat, cb);
    for (Eigen::Index t = 0; t < lat.vectors.cols(); ++t) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      int n_best = 0;
      for (int e = 0; e < k; ++e) {
        double dist = 0.0;
        for (int j = 0; j < d; ++j) {
          const double diff = lat.vectors(j, t) - cb.entries(j, e);
          dist += diff * diff;
        }
        if (dist < best_d) {
          best_d = dist;
          best = e;
          n_best = 1;
        } else if (dist == best_d) {
          ++n_best;  // lowest index wins
        }
      }
      ties += n_best > 1;
      agree += q.indices[static_cast<std::size_t>(t)] == best;
      ++checked;
    }
  }
  return {agree == checked,
          fmt::format("{}/{} indices equal brute-force argmin ({} exact ties, lowest index)", agree, checked, ties)};
}

Outcome criterion_3(const Options&) {
  CodecGeometry g{kToyHeight, kToyWidth, 4, 16, 64};
  CodecArchitecture arch;
  arch.hidden = 16;
  arch.residual_blocks = 1;
  CodecModel model(g, arch, 99, 3);
  const ToyCorpus c = toy_corpus(3);
  Rng rng(3);
  int equal = 0;
  for (int probe = 0; probe < 100; ++probe) {
    const PressureSequence& seq = c.train[rng.below(c.train.size())];
    const nn::Matrix z = model.forward_encoder(model.to_padded_input(seq), nullptr);
    LatentSequence lat;
    lat.vectors = z;
    const QuantizeResult q = model.quantize(lat);
    DecoderTrace trace;
    const nn::Matrix y = model.forward_decoder(q.quantized.vectors, &trace);
    nn::Matrix dy(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < dy.size(); ++i) dy.data()[i] = rng.normal();
    const nn::Matrix d_quantized = model.backward_decoder(dy, trace);
    const nn::Matrix d_encoder = straight_through_backward(d_quantized);
    equal += d_encoder.rows() == d_quantized.rows() && d_encoder.cols() == d_quantized.cols() &&
             (d_encoder.array() == d_quantized.array()).all();
  }
  return {equal == 100, fmt::format("{}/100 probes bit-identical", equal)};
}

Outcome criterion_4(const Options&) {
  constexpr int kDim = 8;
  constexpr int kClusters = 4;
  Rng rng(4);
  // Fixed data: 32 points per cluster around well-separated centers.
  std::vector<nn::Vector> centers(kClusters);
  for (auto& ctr : centers) {
    ctr.resize(kDim);
    for (int j = 0; j < kDim; ++j) ctr(j) = 3.0 * rng.normal();
  }
  nn::Matrix data(kDim, kClusters * 32);
  std::vector<int> cluster_of(static_cast<std::size_t>(data.cols()));
  for (Eigen::Index i = 0; i < data.cols(); ++i) {
    const int k = static_cast<int>(i % kClusters);
    cluster_of[static_cast<std::size_t>(i)] = k;
    for (int j = 0; j < kDim; ++j) data(j, i) = centers[static_cast<std::size_t>(k)](j) + 0.1 * rng.normal();
  }
  std::vector<nn::Vector> means(kClusters, nn::Vector::Zero(kDim));
  for (Eigen::Index i = 0; i < data.cols(); ++i) means[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(i)])] += data.col(i) / 32.0;

  Codebook cb(kClusters, kDim, 99);
  if (cb.alpha() != 0.02) return {false, fmt::format("alpha {} != 0.02", cb.alpha())};
  // Each code starts at a displaced copy of a point from its own cluster;
  // cluster-to-code order is shuffled.
  std::vector<int> order(kClusters);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  for (int k = 0; k < kClusters; ++k) {
    const auto member = static_cast<Eigen::Index>(order[static_cast<std::size_t>(k)] + kClusters * rng.below(32));
    cb.entries.col(k) = data.col(member);
    for (int j = 0; j < kDim; ++j) cb.entries(j, k) += 0.5 * rng.normal();
    cb.ema_counts(k) = 1.0;
    cb.ema_sums.col(k) = cb.entries.col(k);
  }
  std::vector<int> indices;
  for (int step = 0; step < 2000; ++step) {
    LatentSequence lat;
    lat.vectors = data;
    indices = quantize(lat, cb).indices;
    ema_update(cb, data, indices, rng);
  }
  // An active code is judged against the cluster that feeds it.
  double worst = 0.0;
  int active = 0;
  for (int k = 0; k < kClusters; ++k) {
    std::vector<int> votes(kClusters, 0);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] == k) ++votes[static_cast<std::size_t>(cluster_of[i])];
    }
    const auto top = std::max_element(votes.begin(), votes.end());
    if (*top == 0) continue;
    ++active;
    const auto cl = static_cast<std::size_t>(top - votes.begin());
    worst = std::max(worst, (cb.entries.col(k) - means[cl]).norm());
  }
  return {active > 0 && worst < 1e-2,
          fmt::format("{} active codes, max distance to cluster mean {:.2e} (< 1e-2) after 2000 updates", active, worst)};
}

// Codec training through the command-line tool; judged on its loss CSV.
Outcome criterion_5(const Options& opt) {
  const fs::path dir = opt.work / "criterion5";
  fs::remove_all(dir);
  ensure_directory(dir);
  const json cfg = {{"seed", 5},
                    {"run_dir", "run"},
                    {"synth", {{"sequences_per_class", 4}, {"height", 16}, {"width", 8}}},
                    {"codec",
                     {{"codebook_size", 32}, {"latent_dim", 16}, {"hidden", 16}, {"steps", 400},
                      {"warmup_steps", 300}, {"w_r_start", 1.0}, {"w_r_end", 0.5}, {"eval_every", 50}}}};
  write_text_file(dir / "config.json", cfg.dump(2));
  for (const char* cmd : {"synth", "train-codec"}) {
    const std::string line = fmt::format("\"{}\" {} --config \"{}\" > \"{}\" 2>&1", opt.cli.string(), cmd,
                                         (dir / "config.json").string(), (dir / "log.txt").string());
    if (std::system(line.c_str()) != 0) return {false, std::string(cmd) + " failed: " + read_text_file(dir / "log.txt")};
  }
  std::istringstream csv(read_text_file(dir / "run/train-codec/loss.csv"));
  std::string line;
  std::getline(csv, line);
  if (line != "step,L_r,L_q,w_r,w_q,total") return {false, "unexpected header: " + line};
  long rows = 0;
  double worst_rel = 0.0;
  double prev_wr = std::numeric_limits<double>::infinity(), prev_wq = -std::numeric_limits<double>::infinity();
  bool monotone = true;
  while (std::getline(csv, line)) {
    std::istringstream fields(line);
    std::string f;
    std::vector<double> v;
    while (std::getline(fields, f, ',')) v.push_back(std::stod(f));
    if (v.size() != 6 || v[0] != static_cast<double>(rows)) return {false, "malformed row: " + line};
    const double expected = v[3] * v[1] + v[4] * v[2];
    worst_rel = std::max(worst_rel, std::abs(v[5] - expected) / std::max(std::abs(expected), 1e-300));
    monotone = monotone && v[3] <= prev_wr && v[4] >= prev_wq;
    prev_wr = v[3];
    prev_wq = v[4];
    ++rows;
  }
  return {rows == 400 && worst_rel <= 1e-6 && monotone,
          fmt::format("{} rows; max relative decomposition error {:.2e} (<= 1e-6); w_r non-increasing and w_q "
                      "non-decreasing: {}",
                      rows, worst_rel, monotone ? "yes" : "no")};
}

// Reconstruction FID against held-out data in a PCA space fitted on that data.
Outcome criterion_6(const Options&) {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const ToyCorpus c = toy_corpus(100 + seed);
    const CodecTrainConfig full = toy_codec_config(seed);
    const auto fid_of = [&](const CodecTrainConfig& cfg) {
      const CodecTrainResult r = train_codec(c.train, c.val, cfg);
      std::vector<PressureSequence> recon;
      for (const auto& s : c.test) recon.push_back(r.model.reconstruct(s));
      FidOptions fo;
      fo.space = FeatureSpace::kPcaFlat;
      return fid(c.test, recon, fo);
    };
    const double plain = fid_of(plain_vq(full));
    const double best = fid_of(full);
    ok = ok && plain >= best;
    detail += fmt::format("{}seed {}: plain {:.4g} >= full {:.4g}", seed ? "; " : "", seed, plain, best);
  }
  return {ok, detail};
}

Outcome criterion_7(const Options&) {
  Rng rng(7);
  double worst_frechet = 0.0;
  for (int i = 0; i < 1000; ++i) {
    GaussianStats a, b;
    a.mu = nn::Vector::Constant(1, 10.0 * rng.normal());
    b.mu = nn::Vector::Constant(1, 10.0 * rng.normal());
    const double va = std::exp(rng.normal()), vb = std::exp(rng.normal());
    a.sigma = nn::Matrix::Constant(1, 1, va);
    b.sigma = nn::Matrix::Constant(1, 1, vb);
    a.n = b.n = 100;
    const double closed = std::pow(a.mu(0) - b.mu(0), 2) + std::pow(std::sqrt(va) - std::sqrt(vb), 2);
    worst_frechet = std::max(worst_frechet, std::abs(frechet_distance(a, b) - closed));
  }

  SynthConfig sc;
  sc.height = kToyHeight;
  sc.width = kToyWidth;
  sc.sequences_per_class = 2;
  std::vector<PressureSequence> x;
  for (const auto& s : synthesize_sequences(sc)) x.push_back(normalize(s));
  FidOptions pca;
  pca.space = FeatureSpace::kPcaFlat;
  const CodecModel codec(CodecGeometry{kToyHeight, kToyWidth, 4, 16, 32}, CodecArchitecture{}, 99, 7);
  FidOptions latent;
  latent.codec = &codec;
  const double fid_self = std::max(fid(x, x, pca), fid(x, x, latent));

  double worst_r2 = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto frames = static_cast<std::uint32_t>(1 + rng.below(4));
    const auto h = static_cast<std::uint16_t>(1 + rng.below(4));
    const auto w = static_cast<std::uint16_t>(1 + rng.below(4));
    const std::size_t n_seq = 1 + rng.below(3);
    std::vector<PressureSequence> pred, target;
    std::vector<double> p_flat, t_flat;
    for (std::size_t s = 0; s < n_seq; ++s) {
      PressureSequence p(frames, h, w), t(frames, h, w);
      p.normalized = t.normalized = true;
      for (std::size_t j = 0; j < p.cells().size(); ++j) {
        p.cells()[j] = static_cast<float>(rng.uniform() * 0.05);
        t.cells()[j] = static_cast<float>(rng.uniform() * 0.05);
        p_flat.push_back(p.cells()[j]);
        t_flat.push_back(t.cells()[j]);
      }
      pred.push_back(std::move(p));
      target.push_back(std::move(t));
    }
    // Definitional R^2 = 1 - SS_res / SS_tot over all cells, written out directly.
    const auto definitional = [](const std::vector<double>& p, const std::vector<double>& t) {
      const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
      double res = 0.0, tot = 0.0;
      for (std::size_t j = 0; j < t.size(); ++j) {
        res += (t[j] - p[j]) * (t[j] - p[j]);
        tot += (t[j] - mean) * (t[j] - mean);
      }
      if (tot == 0.0) return res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
      return 1.0 - res / tot;
    };
    const auto binarize = [](std::vector<double> v) {
      for (double& e : v) e = e > kDefaultContactThreshold ? 1.0 : 0.0;
      return v;
    };
    const auto gap = [](double a, double b) { return a == b ? 0.0 : std::abs(a - b); };
    worst_r2 = std::max(worst_r2, gap(r2(pred, target), definitional(p_flat, t_flat)));
    worst_r2 = std::max(worst_r2, gap(binarized_r2(pred, target), definitional(binarize(p_flat), binarize(t_flat))));
  }
  const bool ok = worst_frechet <= 1e-8 && fid_self <= 1e-6 && worst_r2 <= 1e-10;
  return {ok, fmt::format("1-D Frechet max error {:.2e} (<= 1e-8); fid(X,X) {:.2e} (<= 1e-6); r2/binarized_r2 max "
                          "error {:.2e} (<= 1e-10)",
                          worst_frechet, fid_self, worst_r2)};
}

struct Memorized {
  CodecModel codec;
  GeneratorModel model;
  std::vector<PressureSequence> prompts;
  std::vector<TokenExample> examples;
};

Memorized memorize_four() {
  const ToyCorpus c = toy_corpus(8);
  CodecTrainConfig cc = toy_codec_config(8);
  cc.steps = 300;
  CodecTrainResult codec = train_codec(c.train, c.val, cc);
  const HashingEmbeddingProvider embedder;
  std::vector<PressureSequence> prompts;
  std::set<std::string> seen;
  for (const auto& s : c.train) {
    if (prompts.size() < 4 && seen.insert(s.description).second &&
        std::none_of(prompts.begin(), prompts.end(), [&](const auto& p) { return p.class_label == s.class_label; })) {
      prompts.push_back(s);
    }
  }
  std::vector<TokenExample> examples;
  for (const auto& p : prompts) examples.push_back({embedder.embed(p.description).vector, tokenize(p, codec.model), {}});
  GeneratorTrainConfig gc = toy_generator_config(8, false);
  gc.steps = 600;
  gc.batch_size = 4;
  gc.learning_rate = 3e-3;
  GeneratorTrainResult g = train_generator_tokens(examples, kToyCodes, kToyLatentDim, gc);
  return {std::move(codec.model), std::move(g.model), prompts, examples};
}

Outcome criterion_8(const Options&) {
  const Memorized m = memorize_four();
  int exact = 0;
  bool shapes = true;
  const HashingEmbeddingProvider embedder;
  for (std::size_t i = 0; i < m.examples.size(); ++i) {
    const TokenSequence got = m.model.generate(m.examples[i].cond);
    exact += got.tokens == m.examples[i].tokens.tokens;
    const PressureSequence out = generate_sequence(m.model, m.codec, embedder.embed(m.prompts[i].description), 120);
    shapes = shapes && out.frames() == 120 && out.height() == kToyHeight && out.width() == kToyWidth;
  }
  return {exact == 4 && shapes, fmt::format("{}/4 token sequences reproduced exactly ({} tokens each); output shape "
                                            "120x{}x{}: {}",
                                            exact, m.examples[0].tokens.tokens.size(), kToyHeight, kToyWidth,
                                            shapes ? "yes" : "no")};
}

Outcome criterion_9(const Options& opt) {
  const fs::path dir = opt.work / "criterion9";
  ensure_directory(dir);
  const Memorized m = memorize_four();
  const GeneratorModel untrained(m.model.config(), kToyCodes, kToyLatentDim, 9);
  untrained.save(dir / "untrained.ckpt");
  m.model.save(dir / "trained.ckpt");

  Rng rng(9);
  long total = 0, closed = 0;
  for (const char* name : {"untrained.ckpt", "trained.ckpt"}) {
    const GeneratorModel g = GeneratorModel::load(dir / name);
    const int max_len = g.config().max_len;
    for (int i = 0; i < 1000; ++i) {
      std::vector<float> cond(static_cast<std::size_t>(g.config().cond_dim));
      if (i % 2 == 0) {
        cond = m.examples[static_cast<std::size_t>(i / 2) % m.examples.size()].cond;
      } else {
        for (float& v : cond) v = static_cast<float>(rng.normal());
      }
      SamplingConfig s;
      s.mode = i % 5 == 0 ? SamplingMode::kGreedy : SamplingMode::kTopK;
      s.top_k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(g.vocab_size())));
      s.temperature = 0.5 + 2.0 * rng.uniform();
      s.seed = rng.next_u64();
      const TokenSequence t = g.generate(cond, s);
      const auto codes = t.codes();
      const bool ok = t.ends_with_end() && static_cast<int>(t.tokens.size()) <= max_len + 1 &&
                      std::all_of(codes.begin(), codes.end(), [&](int c) { return c >= 0 && c < g.codebook_size(); });
      closed += ok;
      ++total;
    }
  }
  return {closed == total, fmt::format("{}/{} generations end with END, stay within max_len+1 and use valid codes",
                                       closed, total)};
}

Outcome criterion_10(const Options&) {
  bool ok = true;
  std::string detail;
  const HashingEmbeddingProvider embedder;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    // Test phases are random, so frame-aligned scores need a larger test set.
    const ToyCorpus c = toy_corpus(200 + seed, 8);
    const CodecTrainResult codec = train_codec(c.train, c.val, toy_codec_config(seed));
    const auto pairs = pairs_of(c.train);
    const auto score = [&](bool continuous) {
      const GeneratorTrainResult g = train_generator(pairs, codec.model, embedder, toy_generator_config(seed, continuous));
      return binarized_r2(generate_for(g.model, codec.model, embedder, c.test), c.test);
    };
    const double vq = score(false);
    const double baseline = score(true);
    ok = ok && vq >= baseline;
    detail += fmt::format("{}seed {}: VQ {:.4f} >= baseline {:.4f}", seed ? "; " : "", seed, vq, baseline);
  }
  return {ok, detail};
}

LabeledSet labeled(std::vector<PressureSequence> seqs, const std::string& prefix) {
  LabeledSet set;
  for (const auto& s : seqs) set.ids.push_back(prefix + s.activity_id);
  set.sequences = std::move(seqs);
  return set;
}

std::vector<PressureSequence> real_proxy(int per_class, std::uint64_t seed) {
  SynthConfig sc;
  sc.height = kToyHeight;
  sc.width = kToyWidth;
  sc.sequences_per_class = per_class;
  sc.seed = seed;
  std::vector<PressureSequence> out;
  std::uint64_t i = 0;
  for (const auto& s : synthesize_sequences(sc)) out.push_back(apply_sensor_gap(s, SensorGapConfig{}, mix_seed(seed, i++)));
  return out;
}

Outcome criterion_11(const Options&) {
  constexpr int kSamplesPerDescription = 1;
  constexpr int kRealPerClass = 4;
  const auto t0 = Clock::now();
  const ToyCorpus c = toy_corpus(11);
  const HashingEmbeddingProvider embedder;
  const CodecTrainResult codec = train_codec(c.train, c.val, toy_codec_config(11));
  const GeneratorTrainResult gen = train_generator(pairs_of(c.train), codec.model, embedder, toy_generator_config(11, false));

  // Matched budgets: one top-k sample per training description gives four
  // synthetic sequences per class, as many as the real-proxy set.
  std::map<std::string, ActivityClass> descriptions;
  for (const auto& s : c.train) descriptions.emplace(s.description, s.class_label);
  std::vector<PressureSequence> synthetic;
  std::uint64_t n = 0;
  for (const auto& [text, label] : descriptions) {
    const TextEmbedding cond = embedder.embed(text);
    for (int k = 0; k < kSamplesPerDescription; ++k, ++n) {
      SamplingConfig s;
      s.mode = SamplingMode::kTopK;
      s.top_k = 5;
      s.seed = mix_seed(11, n);
      PressureSequence seq = generate_sequence(gen.model, codec.model, cond, kCanonicalFrames, s);
      seq.activity_id = fmt::format("gen_{:03d}", n);
      seq.class_label = label;
      seq.description = text;
      synthetic.push_back(std::move(seq));
    }
  }
  ExperimentData data;
  data.synthetic = labeled(std::move(synthetic), "synthetic/");
  data.real = labeled(real_proxy(kRealPerClass, 1101), "real/");
  data.evaluation = labeled(real_proxy(6, 1102), "evaluation/");
  const std::vector<Recipe> recipes = {Recipe::kSyntheticOnly, Recipe::kRealOnly, Recipe::kCombined};
  HarConfig har;
  const ExperimentResult r = run_experiment(data, recipes, 5, 11, har);
  const double secs = seconds_since(t0);
  const double syn = r.aggregates[0].mean, real = r.aggregates[1].mean, comb = r.aggregates[2].mean;
  const bool ok = real > syn && comb >= real - 0.02 && secs < 1800.0;
  return {ok, fmt::format("macro F1 over 5 seeds: real-proxy-only {:.3f} > synthetic-only {:.3f}; combined {:.3f} >= "
                          "real-proxy-only - 0.02; {:.0f} s (< 1800 s)",
                          real, syn, comb, secs)};
}

// Every file under `root`, relative path -> bytes; run manifests lose their timings.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string bytes = read_text_file(e.path());
    if (e.path().filename() == "run_manifest.json") {
      json j = json::parse(bytes);
      j.erase("timings");
      bytes = j.dump();
    }
    files[fs::relative(e.path(), root).generic_string()] = std::move(bytes);
  }
  return files;
}

Outcome criterion_12(const Options& opt) {
  if (opt.cli.empty()) return {false, "no --cli binary given"};
  const fs::path dir = opt.work / "criterion12";
  fs::remove_all(dir);
  ensure_directory(dir);
  const json cfg = {
      {"seed", 12},
      {"run_dir", "run"},
      {"synth",
       {{"sequences_per_class", 8}, {"height", 16}, {"width", 8}, {"split", {0.75, 0.125, 0.125}},
        {"real_sequences_per_class", 4}, {"eval_sequences_per_class", 4}}},
      {"embedding", {{"provider", "hash"}}},
      {"codec", {{"codebook_size", 64}, {"latent_dim", 16}, {"hidden", 32}, {"steps", 300}, {"warmup_steps", 100}}},
      {"generator", {{"layers", 2}, {"heads", 2}, {"width", 32}, {"max_len", 32}, {"steps", 200}}},
      {"generate", {{"samples_per_prompt", 2}, {"sampling", {{"mode", "top-k"}, {"top_k", 8}}}}},
      {"har", {{"repetitions", 2}, {"epochs", 3}}}};
  write_text_file(dir / "config.json", cfg.dump(2));
  // Network access is ruled out by pointing any remote endpoint at nothing.
  for (const char* run : {"run_a", "run_b"}) {
    for (const char* cmd : {"synth", "train-codec", "train-generator", "generate", "evaluate", "har"}) {
      const std::string line =
          fmt::format("env -u PRESSGEN_EMBED_URL -u PRESSGEN_EMBED_KEY \"{}\" {} --config \"{}\" --run-dir \"{}\" "
                      "> \"{}\" 2>&1",
                      opt.cli.string(), cmd, (dir / "config.json").string(), (dir / run).string(),
                      (dir / "log.txt").string());
      const int status = std::system(line.c_str());
      if (status != 0) {
        return {false, fmt::format("{} in {} exited with status {}: {}", cmd, run, status,
                                   read_text_file(dir / "log.txt"))};
      }
    }
  }
  const auto a = snapshot(dir / "run_a");
  const auto b = snapshot(dir / "run_b");
  std::size_t differing = 0;
  std::string first;
  for (const auto& [path, bytes] : a) {
    const auto it = b.find(path);
    if (it == b.end() || it->second != bytes) {
      if (differing++ == 0) first = path;
    }
  }
  differing += b.size() > a.size() ? b.size() - a.size() : 0;
  return {differing == 0 && !a.empty(),
          fmt::format("all 6 commands exit 0 twice; {} artifacts compared, {} differ{}", a.size(), differing,
                      first.empty() ? "" : " (first: " + first + ")")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(const Options&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> kAll = {
      {1, "codec round-trip learning", criterion_1},
      {2, "quantizer oracle equivalence", criterion_2},
      {3, "straight-through gradient identity", criterion_3},
      {4, "EMA convergence", criterion_4},
      {5, "loss decomposition and annealing", criterion_5},
      {6, "ablation direction", criterion_6},
      {7, "metric oracles", criterion_7},
      {8, "generator memorization", criterion_8},
      {9, "termination and vocabulary closure", criterion_9},
      {10, "VQ vs continuous baseline", criterion_10},
      {11, "HAR recipe ordering", criterion_11},
      {12, "hermetic end-to-end", criterion_12},
  };
  return kAll;
}

}  // namespace
}  // namespace pressgen::acceptance

int main(int argc, char** argv) {
  using namespace pressgen::acceptance;
  CLI::App app{"pressgen acceptance criteria"};
  std::vector<std::string> selected;
  Options opt;
  std::string cli, work;
  app.add_option("criteria", selected, "criterion ids or 'all'")->required();
  app.add_option("--cli", cli, "pressgen executable");
  app.add_option("--work", work, "scratch directory");
  CLI11_PARSE(app, argc, argv);
  opt.cli = cli.empty() ? fs::path{} : fs::absolute(cli);
  opt.work = work.empty() ? fs::temp_directory_path() / "pressgen_acceptance" : fs::absolute(work);
  pressgen::ensure_directory(opt.work);
  pressgen::logger()->set_level(spdlog::level::err);

  std::set<int> ids;
  for (const auto& s : selected) {
    if (s == "all") {
      for (const auto& c : criteria()) ids.insert(c.id);
    } else {
      ids.insert(std::stoi(s));
    }
  }
  int failures = 0;
  for (const auto& c : criteria()) {
    if (!ids.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run(opt);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    fmt::print("{} criterion {:>2} ({}): {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail,
               seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
