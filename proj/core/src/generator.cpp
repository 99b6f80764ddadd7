// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "pressgen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pressgen/error.hpp"
#include "pressgen/hash.hpp"

namespace pressgen {

using nn::Matrix;
using nn::Vector;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Tokens

void TokenSequence::validate(int max_len) const {
  if (end_token < 1) throw Error(ErrorCode::kInvalidArgument, "token sequence has no vocabulary");
  if (static_cast<long>(tokens.size()) > static_cast<long>(max_len) + 1) {
    throw Error(ErrorCode::kOutOfRange, "token sequence longer than max_len + 1");
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t == end_token && i + 1 != tokens.size()) {
      throw Error(ErrorCode::kInvalidArgument, "END token at interior position " + std::to_string(i));
    }
    if (t < 0 || t > end_token) {
      throw Error(ErrorCode::kOutOfRange, "token " + std::to_string(t) + " outside [0, " + std::to_string(end_token) + "]");
    }
  }
}

TokenSequence tokenize(const PressureSequence& seq, const CodecModel& codec) {
  TokenSequence out;
  out.end_token = codec.geometry().codebook_size;
  out.tokens = codec.quantize(codec.encode(seq)).indices;
  out.tokens.push_back(out.end_token);
  return out;
}

PressureSequence detokenize(const TokenSequence& tokens, const CodecModel& codec, std::uint32_t target_frames) {
  if (tokens.end_token != codec.geometry().codebook_size) {
    throw Error(ErrorCode::kArtifactMismatch, "token vocabulary does not match the codec codebook");
  }
  tokens.validate(std::numeric_limits<int>::max() - 1);
  const auto codes = tokens.codes();
  if (codes.empty()) throw Error(ErrorCode::kEmptyInput, "detokenize: no codes before END");
  const auto natural = static_cast<std::uint32_t>(codes.size() * static_cast<std::size_t>(codec.geometry().downsample));
  return codec.decode_indices(codes, target_frames > 0 ? target_frames : natural);
}

std::string_view to_string(SamplingMode m) { return m == SamplingMode::kGreedy ? "greedy" : "top-k"; }

SamplingMode parse_sampling_mode(std::string_view name) {
  if (name == "greedy") return SamplingMode::kGreedy;
  if (name == "top-k" || name == "topk") return SamplingMode::kTopK;
  throw Error(ErrorCode::kInvalidConfig, "unknown sampling mode '" + std::string(name) + "'", "sampling.mode");
}

void GeneratorConfig::validate(int codebook_size) const {
  auto fail = [](const char* field, const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what, field); };
  if (codebook_size < 1) fail("codebook_size", "codebook must be non-empty");
  if (layers < 1) fail("generator.layers", "must be >= 1");
  if (heads < 1) fail("generator.heads", "must be >= 1");
  if (width < 1 || width % heads != 0) fail("generator.width", "must be a positive multiple of heads");
  if (max_len < 1) fail("generator.max_len", "must be >= 1");
  if (cond_dim < 1) fail("generator.cond_dim", "must be >= 1");
  if (sampling.mode == SamplingMode::kTopK && (sampling.top_k < 1 || sampling.top_k > codebook_size + 1)) {
    fail("generator.sampling.top_k", "must lie in [1, K + 1]");
  }
  if (!(sampling.temperature > 0.0)) fail("generator.sampling.temperature", "must be positive");
}

// ---------------------------------------------------------------------------
// Model

GeneratorModel::GeneratorModel(const GeneratorConfig& cfg, int codebook_size, int latent_dim, std::uint64_t seed)
    : cfg_(cfg), codebook_size_(codebook_size), latent_dim_(latent_dim) {
  cfg_.validate(codebook_size);
  if (latent_dim < 1) throw Error(ErrorCode::kInvalidConfig, "latent_dim must be >= 1", "latent_dim");
  const int w = cfg_.width;
  Rng rng(seed);
  cond_proj_ = nn::Linear("cond_proj", cfg_.cond_dim, w);
  cond_proj_.init(rng, 1.0 / std::sqrt(static_cast<double>(cfg_.cond_dim)) * 0.5);
  if (cfg_.continuous) {
    cont_proj_ = nn::Linear("cont_proj", latent_dim, w);
    cont_proj_.init(rng, 0.5 / std::sqrt(static_cast<double>(latent_dim)));
  } else {
    token_embed_ = nn::Embedding("token_embed", codebook_size + 1, w);
    token_embed_.init(rng, 0.02);
  }
  positions_.name = "positions";
  positions_.value.resize(w, cfg_.max_len);
  for (Eigen::Index i = 0; i < positions_.value.size(); ++i) positions_.value.data()[i] = rng.normal(0.0, 0.02);
  positions_.zero_grad();

  const double resid_std = 0.02 / std::sqrt(2.0 * cfg_.layers);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    Block b{nn::LayerNorm(p + "ln1", w), nn::LayerNorm(p + "ln2", w), nn::Linear(p + "qkv", w, 3 * w),
            nn::Linear(p + "proj", w, w),  nn::Linear(p + "fc1", w, 4 * w), nn::Linear(p + "fc2", 4 * w, w)};
    b.qkv.init(rng, 0.02);
    b.proj.init(rng, resid_std);
    b.fc1.init(rng, 0.02);
    b.fc2.init(rng, resid_std);
    blocks_.push_back(std::move(b));
  }
  ln_f_ = nn::LayerNorm("ln_f", w);
  head_ = nn::Linear("head", w, cfg_.continuous ? latent_dim : codebook_size + 1);
  head_.init(rng, 0.02);
}

nn::ParameterList GeneratorModel::parameters() {
  nn::ParameterList p;
  cond_proj_.collect(p);
  if (cfg_.continuous) {
    cont_proj_.collect(p);
  } else {
    token_embed_.collect(p);
  }
  p.push_back(&positions_);
  for (auto& b : blocks_) {
    b.ln1.collect(p);
    b.qkv.collect(p);
    b.proj.collect(p);
    b.ln2.collect(p);
    b.fc1.collect(p);
    b.fc2.collect(p);
  }
  ln_f_.collect(p);
  head_.collect(p);
  return p;
}

namespace {

// Causal attention over each segment independently. qkv is 3w x N.
Matrix attention_forward(const Matrix& qkv, int width, int heads, std::span<const Segment> segments,
                         AttentionTrace* trace) {
  const int dh = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(width, qkv.cols());
  if (trace) trace->probs.clear();
  for (const Segment& s : segments) {
    for (int h = 0; h < heads; ++h) {
      const auto q = qkv.block(h * dh, s.offset, dh, s.length);
      const auto k = qkv.block(width + h * dh, s.offset, dh, s.length);
      const auto v = qkv.block(2 * width + h * dh, s.offset, dh, s.length);
      Matrix p = (k.transpose() * q) * scale;  // keys x queries
      for (int j = 0; j < s.length; ++j) {
        const double m = p.col(j).head(j + 1).maxCoeff();
        double sum = 0.0;
        for (int i = 0; i <= j; ++i) {
          p(i, j) = std::exp(p(i, j) - m);
          sum += p(i, j);
        }
        p.col(j).head(j + 1) /= sum;
        p.col(j).tail(s.length - j - 1).setZero();
      }
      out.block(h * dh, s.offset, dh, s.length).noalias() = v * p;
      if (trace) trace->probs.push_back(std::move(p));
    }
  }
  return out;
}

Matrix attention_backward(const Matrix& d_out, const Matrix& qkv, int width, int heads,
                          std::span<const Segment> segments, const AttentionTrace& trace) {
  const int dh = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dqkv = Matrix::Zero(3 * width, qkv.cols());
  std::size_t idx = 0;
  for (const Segment& s : segments) {
    for (int h = 0; h < heads; ++h) {
      const Matrix& p = trace.probs[idx++];
      const auto q = qkv.block(h * dh, s.offset, dh, s.length);
      const auto k = qkv.block(width + h * dh, s.offset, dh, s.length);
      const auto v = qkv.block(2 * width + h * dh, s.offset, dh, s.length);
      const auto dout = d_out.block(h * dh, s.offset, dh, s.length);
      dqkv.block(2 * width + h * dh, s.offset, dh, s.length).noalias() = dout * p.transpose();
      Matrix dp = v.transpose() * dout;
      const Eigen::RowVectorXd inner = p.cwiseProduct(dp).colwise().sum();
      Matrix ds = p.cwiseProduct(dp.rowwise() - inner) * scale;
      dqkv.block(h * dh, s.offset, dh, s.length).noalias() = k * ds;
      dqkv.block(width + h * dh, s.offset, dh, s.length).noalias() = q * ds.transpose();
    }
  }
  return dqkv;
}

}  // namespace

Matrix GeneratorModel::forward(const Matrix& cond, std::span<const int> token_inputs, const Matrix& continuous_inputs,
                               std::span<const Segment> segments, ForwardTrace* trace) const {
  const int w = cfg_.width;
  if (cond.rows() != cfg_.cond_dim || cond.cols() != static_cast<Eigen::Index>(segments.size())) {
    throw Error(ErrorCode::kDimensionMismatch, "generator: conditioning must be cond_dim x segments");
  }
  int total = 0;
  for (const Segment& s : segments) {
    if (s.offset != total || s.length < 1 || s.length > cfg_.max_len) {
      throw Error(ErrorCode::kOutOfRange, "generator: segment layout invalid or longer than max_len");
    }
    total += s.length;
  }
  const int n_inputs = total - static_cast<int>(segments.size());
  if (cfg_.continuous) {
    if (continuous_inputs.cols() != n_inputs || (n_inputs > 0 && continuous_inputs.rows() != latent_dim_)) {
      throw Error(ErrorCode::kDimensionMismatch, "generator: continuous inputs do not match segments");
    }
  } else if (static_cast<int>(token_inputs.size()) != n_inputs) {
    throw Error(ErrorCode::kDimensionMismatch, "generator: token inputs do not match segments");
  }

  Matrix x(w, total);
  const Matrix cond_emb = cond_proj_.forward(cond);
  Matrix in_emb;
  std::vector<int> ids;
  if (cfg_.continuous) {
    if (n_inputs > 0) in_emb = cont_proj_.forward(continuous_inputs);
  } else {
    for (int t : token_inputs) {
      if (t < 0 || t >= codebook_size_) {
        throw Error(ErrorCode::kOutOfRange, "generator: input token " + std::to_string(t) + " is not a code");
      }
    }
    in_emb = token_embed_.forward(token_inputs);
  }
  std::vector<int> token_cols, positions(static_cast<std::size_t>(total));
  int next_input = 0;
  for (std::size_t si = 0; si < segments.size(); ++si) {
    const Segment& s = segments[si];
    x.col(s.offset) = cond_emb.col(static_cast<Eigen::Index>(si)) + positions_.value.col(0);
    positions[static_cast<std::size_t>(s.offset)] = 0;
    for (int j = 1; j < s.length; ++j) {
      x.col(s.offset + j) = in_emb.col(next_input++) + positions_.value.col(j);
      positions[static_cast<std::size_t>(s.offset + j)] = j;
      token_cols.push_back(s.offset + j);
    }
  }
  if (trace) {
    trace->segments.assign(segments.begin(), segments.end());
    trace->cond_in = cond;
    trace->cont_in = continuous_inputs;
    trace->token_ids.assign(token_inputs.begin(), token_inputs.end());
    trace->token_cols = std::move(token_cols);
    trace->positions = std::move(positions);
    trace->blocks.resize(blocks_.size());
  }

  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    BlockTrace* bt = trace ? &trace->blocks[l] : nullptr;
    Matrix a = b.ln1.forward(x, bt ? &bt->ln1 : nullptr);
    Matrix qkv = b.qkv.forward(a);
    Matrix att = attention_forward(qkv, w, cfg_.heads, segments, bt ? &bt->attn : nullptr);
    Matrix mid = x + b.proj.forward(att);
    Matrix c = b.ln2.forward(mid, bt ? &bt->ln2 : nullptr);
    Matrix f = b.fc1.forward(c);
    Matrix g = nn::gelu(f);
    Matrix y = mid + b.fc2.forward(g);
    if (bt) {
      bt->input = std::move(x);
      bt->ln1_out = std::move(a);
      bt->qkv = std::move(qkv);
      bt->attn_out = std::move(att);
      bt->mid = std::move(mid);
      bt->ln2_out = std::move(c);
      bt->fc1_pre = std::move(f);
      bt->fc1_act = std::move(g);
    }
    x = std::move(y);
  }
  Matrix fin = ln_f_.forward(x, trace ? &trace->ln_f : nullptr);
  Matrix out = head_.forward(fin);
  if (trace) trace->final_hidden = std::move(fin);
  return out;
}

void GeneratorModel::backward(const Matrix& d_output, const ForwardTrace& tr) {
  Matrix dx = ln_f_.backward(head_.backward(d_output, tr.final_hidden), tr.ln_f);
  for (std::size_t l = blocks_.size(); l-- > 0;) {
    Block& b = blocks_[l];
    const BlockTrace& bt = tr.blocks[l];
    Matrix df = nn::gelu_backward(b.fc2.backward(dx, bt.fc1_act), bt.fc1_pre);
    Matrix dmid = dx + b.ln2.backward(b.fc1.backward(df, bt.ln2_out), bt.ln2);
    Matrix datt = b.proj.backward(dmid, bt.attn_out);
    Matrix dqkv = attention_backward(datt, bt.qkv, cfg_.width, cfg_.heads, tr.segments, bt.attn);
    dx = dmid + b.ln1.backward(b.qkv.backward(dqkv, bt.ln1_out), bt.ln1);
  }
  for (Eigen::Index c = 0; c < dx.cols(); ++c) positions_.grad.col(tr.positions[static_cast<std::size_t>(c)]) += dx.col(c);
  Matrix dcond(cfg_.width, static_cast<Eigen::Index>(tr.segments.size()));
  for (std::size_t si = 0; si < tr.segments.size(); ++si) {
    dcond.col(static_cast<Eigen::Index>(si)) = dx.col(tr.segments[si].offset);
  }
  cond_proj_.backward(dcond, tr.cond_in);
  if (tr.token_cols.empty()) return;
  Matrix din(cfg_.width, static_cast<Eigen::Index>(tr.token_cols.size()));
  for (std::size_t i = 0; i < tr.token_cols.size(); ++i) din.col(static_cast<Eigen::Index>(i)) = dx.col(tr.token_cols[i]);
  if (cfg_.continuous) {
    cont_proj_.backward(din, tr.cont_in);
  } else {
    token_embed_.backward(din, tr.token_ids);
  }
}

Vector GeneratorModel::cond_vector(std::span<const float> cond) const {
  if (static_cast<int>(cond.size()) != cfg_.cond_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "conditioning width " + std::to_string(cond.size()) +
                                                   " does not match the generator (" + std::to_string(cfg_.cond_dim) +
                                                   ")");
  }
  Vector v(cfg_.cond_dim);
  for (int i = 0; i < cfg_.cond_dim; ++i) v(i) = cond[static_cast<std::size_t>(i)];
  return v;
}

Vector GeneratorModel::embed_input(int token, std::span<const float> cond, int position) const {
  if (position == 0) return cond_proj_.forward(cond_vector(cond)).col(0) + positions_.value.col(0);
  return token_embed_.table.value.col(token) + positions_.value.col(position);
}

Vector GeneratorModel::step(DecodeState& state, const Vector& input) const {
  const int w = cfg_.width;
  const int dh = w / cfg_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (state.keys.empty()) {
    state.keys.assign(blocks_.size(), Matrix(w, cfg_.max_len));
    state.values.assign(blocks_.size(), Matrix(w, cfg_.max_len));
    state.length = 0;
  }
  if (state.length >= cfg_.max_len) throw Error(ErrorCode::kOutOfRange, "decode state exceeds max_len");
  const int t = state.length;
  Matrix x = input;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    const Matrix qkv = b.qkv.forward(b.ln1.forward(x, nullptr));
    state.keys[l].col(t) = qkv.block(w, 0, w, 1);
    state.values[l].col(t) = qkv.block(2 * w, 0, w, 1);
    Matrix att(w, 1);
    for (int h = 0; h < cfg_.heads; ++h) {
      const auto k = state.keys[l].block(h * dh, 0, dh, t + 1);
      const auto v = state.values[l].block(h * dh, 0, dh, t + 1);
      Vector s = (k.transpose() * qkv.block(h * dh, 0, dh, 1)) * scale;
      const double m = s.maxCoeff();
      s = (s.array() - m).exp();
      s /= s.sum();
      att.block(h * dh, 0, dh, 1).noalias() = v * s;
    }
    x += b.proj.forward(att);
    x += b.fc2.forward(nn::gelu(b.fc1.forward(b.ln2.forward(x, nullptr))));
  }
  state.length = t + 1;
  return head_.forward(ln_f_.forward(x, nullptr)).col(0);
}

Vector GeneratorModel::next_token_logits(std::span<const int> prefix, std::span<const float> cond) const {
  if (cfg_.continuous) throw Error(ErrorCode::kInvalidArgument, "continuous generator has no token logits");
  if (static_cast<int>(prefix.size()) >= cfg_.max_len) {
    throw Error(ErrorCode::kOutOfRange, "prefix length " + std::to_string(prefix.size()) + " must be < max_len " +
                                            std::to_string(cfg_.max_len));
  }
  const Segment seg{0, static_cast<int>(prefix.size()) + 1};
  const Matrix out = forward(cond_vector(cond), prefix, Matrix(), std::span<const Segment>(&seg, 1), nullptr);
  return out.col(out.cols() - 1);
}

int argmax_token(const Vector& logits) {
  int best = 0;
  for (int i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = i;
  }
  return best;
}

int sample_top_k(const Vector& logits, int k, double temperature, Rng& rng) {
  const int n = static_cast<int>(logits.size());
  if (k < 1 || k > n) throw Error(ErrorCode::kInvalidArgument, "top-k outside [1, vocabulary]");
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return logits(a) > logits(b); });
  order.resize(static_cast<std::size_t>(k));
  std::vector<double> w(order.size());
  const double top = logits(order[0]);
  double total = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    w[i] = std::exp((logits(order[i]) - top) / temperature);
    total += w[i];
  }
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < order.size(); ++i) {
    u -= w[i];
    if (u < 0.0) return order[i];
  }
  return order.back();
}

TokenSequence GeneratorModel::generate(std::span<const float> cond) const { return generate(cond, cfg_.sampling); }

TokenSequence GeneratorModel::generate(std::span<const float> cond, const SamplingConfig& sampling) const {
  if (cfg_.continuous) throw Error(ErrorCode::kInvalidArgument, "continuous generator does not emit tokens");
  Rng rng(sampling.seed);
  TokenSequence out;
  out.end_token = end_token();
  DecodeState state;
  Vector logits = step(state, embed_input(0, cond, 0));
  while (static_cast<int>(out.tokens.size()) < cfg_.max_len) {
    const int tok = sampling.mode == SamplingMode::kGreedy
                        ? argmax_token(logits)
                        : sample_top_k(logits, sampling.top_k, sampling.temperature, rng);
    if (tok == end_token()) break;
    out.tokens.push_back(tok);
    const int n = static_cast<int>(out.tokens.size());
    if (n >= cfg_.max_len) break;
    logits = step(state, embed_input(tok, cond, n));
  }
  out.tokens.push_back(end_token());
  return out;
}

Matrix GeneratorModel::generate_continuous(std::span<const float> cond) const {
  if (!cfg_.continuous) throw Error(ErrorCode::kInvalidArgument, "token generator has no continuous output");
  if (continuous_length < 1 || continuous_length > cfg_.max_len) {
    throw Error(ErrorCode::kInvalidConfig, "continuous_length must lie in [1, max_len]");
  }
  Matrix out(latent_dim_, continuous_length);
  DecodeState state;
  Vector y = step(state, embed_input(0, cond, 0));
  out.col(0) = y;
  for (int i = 1; i < continuous_length; ++i) {
    const Vector in = cont_proj_.forward(y).col(0) + positions_.value.col(i);
    y = step(state, in);
    out.col(i) = y;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

nn::CheckpointContainer GeneratorModel::to_checkpoint() const {
  nn::CheckpointContainer ckpt;
  ckpt.kind = std::string(kCheckpointKind);
  json header = {
      {"config",
       {{"layers", cfg_.layers},
        {"heads", cfg_.heads},
        {"width", cfg_.width},
        {"max_len", cfg_.max_len},
        {"cond_dim", cfg_.cond_dim},
        {"continuous", cfg_.continuous},
        {"sampling",
         {{"mode", std::string(to_string(cfg_.sampling.mode))},
          {"top_k", cfg_.sampling.top_k},
          {"temperature", cfg_.sampling.temperature},
          {"seed", cfg_.sampling.seed}}}}},
      {"codebook_size", codebook_size_},
      {"vocab_size", vocab_size()},
      {"latent_dim", latent_dim_},
      {"continuous_length", continuous_length},
      {"codec_hash", codec_hash},
      {"embedding_provider", embedding_provider},
  };
  ckpt.header_json = header.dump();
  nn::store_parameters(const_cast<GeneratorModel*>(this)->parameters(), ckpt);
  return ckpt;
}

GeneratorModel GeneratorModel::from_checkpoint(const nn::CheckpointContainer& ckpt) {
  if (ckpt.kind != kCheckpointKind) throw Error(ErrorCode::kArtifactMismatch, "not a generator checkpoint");
  GeneratorConfig cfg;
  int k = 0, d = 0, cont_len = 0;
  std::string codec_hash, provider;
  try {
    const json h = json::parse(ckpt.header_json);
    const auto& c = h.at("config");
    cfg.layers = c.at("layers");
    cfg.heads = c.at("heads");
    cfg.width = c.at("width");
    cfg.max_len = c.at("max_len");
    cfg.cond_dim = c.at("cond_dim");
    cfg.continuous = c.at("continuous");
    const auto& s = c.at("sampling");
    cfg.sampling.mode = parse_sampling_mode(s.at("mode").get<std::string>());
    cfg.sampling.top_k = s.at("top_k");
    cfg.sampling.temperature = s.at("temperature");
    cfg.sampling.seed = s.at("seed");
    k = h.at("codebook_size");
    d = h.at("latent_dim");
    cont_len = h.at("continuous_length");
    codec_hash = h.at("codec_hash");
    provider = h.at("embedding_provider");
    if (h.at("vocab_size").get<int>() != k + 1) {
      throw Error(ErrorCode::kArtifactMismatch, "generator vocabulary is not codebook size + 1");
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kMalformedResponse, std::string("generator checkpoint header: ") + ex.what());
  }
  GeneratorModel model(cfg, k, d, 0);
  nn::restore_parameters(model.parameters(), ckpt);
  model.codec_hash = codec_hash;
  model.embedding_provider = provider;
  model.continuous_length = cont_len;
  return model;
}

void GeneratorModel::save(const std::filesystem::path& path) const { nn::write_checkpoint(path, to_checkpoint()); }

GeneratorModel GeneratorModel::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::read_checkpoint(path, std::string(kCheckpointKind)));
}

void GeneratorModel::check_codec(const std::string& hash) const {
  if (hash != codec_hash) {
    throw Error(ErrorCode::kArtifactMismatch,
                "generator was trained against codec " + codec_hash + " but codec " + hash + " was supplied");
  }
}

// ---------------------------------------------------------------------------
// Training

void GeneratorTrainConfig::validate(int codebook_size) const {
  model.validate(codebook_size);
  auto fail = [](const char* field, const char* what) { throw Error(ErrorCode::kInvalidConfig, what, field); };
  if (steps < 1) fail("generator.steps", "must be >= 1");
  if (batch_size < 1) fail("generator.batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) fail("generator.learning_rate", "must be positive");
  if (weight_decay < 0.0) fail("generator.weight_decay", "must be >= 0");
  if (warmup_steps < 0) fail("generator.warmup_steps", "must be >= 0");
}

GeneratorTrainResult train_generator_tokens(std::span<const TokenExample> examples, int codebook_size,
                                            int latent_dim, const GeneratorTrainConfig& cfg) {
  cfg.validate(codebook_size);
  if (examples.empty()) throw Error(ErrorCode::kEmptyInput, "train_generator: no training pairs");
  const GeneratorConfig& mc = cfg.model;

  GeneratorModel model(mc, codebook_size, latent_dim, mix_seed(cfg.seed, 11));
  for (const auto& ex : examples) {
    if (static_cast<int>(ex.cond.size()) != mc.cond_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "train_generator: conditioning width mismatch");
    }
    if (mc.continuous) {
      if (ex.continuous.rows() != latent_dim || ex.continuous.cols() < 1) {
        throw Error(ErrorCode::kDimensionMismatch, "train_generator: continuous target shape");
      }
      if (model.continuous_length == 0) model.continuous_length = static_cast<int>(ex.continuous.cols());
      if (ex.continuous.cols() != model.continuous_length) {
        throw Error(ErrorCode::kDimensionMismatch, "train_generator: continuous targets differ in length");
      }
    } else {
      if (ex.tokens.end_token != codebook_size) throw Error(ErrorCode::kArtifactMismatch, "token vocabulary mismatch");
      ex.tokens.validate(std::numeric_limits<int>::max() - 1);
      if (!ex.tokens.ends_with_end()) throw Error(ErrorCode::kInvalidArgument, "training tokens must end with END");
    }
  }
  if (mc.continuous && model.continuous_length > mc.max_len) {
    throw Error(ErrorCode::kInvalidConfig, "continuous target length exceeds max_len", "generator.max_len");
  }

  nn::ParameterList params = model.parameters();
  nn::Adam adam(params, nn::AdamConfig{0.9, 0.98, 1e-9, cfg.weight_decay});
  Rng rng(mix_seed(cfg.seed, 12));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  GeneratorTrainResult result{model, {}};
  result.loss_history.reserve(static_cast<std::size_t>(cfg.steps));
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    const double lr = cfg.warmup_steps > 0 && step < cfg.warmup_steps
                          ? cfg.learning_rate * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps)
                          : cfg.learning_rate;
    const int b_size = std::min<int>(cfg.batch_size, static_cast<int>(examples.size()));
    std::vector<Segment> segments;
    Matrix cond(mc.cond_dim, b_size);
    std::vector<int> inputs, targets;
    std::vector<const TokenExample*> batch;
    int offset = 0;
    for (int b = 0; b < b_size; ++b) {
      if (cursor >= order.size()) {
        rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      const TokenExample& ex = examples[order[cursor++]];
      batch.push_back(&ex);
      for (int i = 0; i < mc.cond_dim; ++i) cond(i, b) = ex.cond[static_cast<std::size_t>(i)];
      int len = 0;
      if (mc.continuous) {
        len = model.continuous_length;
      } else {
        const auto& toks = ex.tokens.tokens;
        len = std::min<int>(static_cast<int>(toks.size()), mc.max_len);
        inputs.insert(inputs.end(), toks.begin(), toks.begin() + (len - 1));
        targets.insert(targets.end(), toks.begin(), toks.begin() + len);
      }
      segments.push_back({offset, len});
      offset += len;
    }

    Matrix cont_in, cont_target;
    if (mc.continuous) {
      const int l = model.continuous_length;
      cont_in.resize(latent_dim, static_cast<Eigen::Index>(b_size) * (l - 1));
      cont_target.resize(latent_dim, static_cast<Eigen::Index>(b_size) * l);
      for (int b = 0; b < b_size; ++b) {
        if (l > 1) cont_in.middleCols(static_cast<Eigen::Index>(b) * (l - 1), l - 1) = batch[static_cast<std::size_t>(b)]->continuous.leftCols(l - 1);
        cont_target.middleCols(static_cast<Eigen::Index>(b) * l, l) = batch[static_cast<std::size_t>(b)]->continuous;
      }
    }

    nn::zero_grad(params);
    ForwardTrace trace;
    const Matrix out = model.forward(cond, inputs, cont_in, segments, &trace);
    Matrix d_out;
    double loss = 0.0;
    if (mc.continuous) {
      const Matrix diff = out - cont_target;
      loss = diff.squaredNorm() / static_cast<double>(diff.size());
      d_out = diff * (2.0 / static_cast<double>(diff.size()));
    } else {
      loss = nn::cross_entropy(out, targets, &d_out);
    }
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kNumerical, "train_generator: non-finite loss at step " + std::to_string(step));
    }
    model.backward(d_out, trace);
    nn::clip_grad_norm(params, cfg.grad_clip);
    adam.step(lr);
    result.loss_history.push_back(loss);
  }
  result.model = std::move(model);
  return result;
}

GeneratorTrainResult train_generator(std::span<const TextSequencePair> pairs, const CodecModel& codec,
                                     const EmbeddingProvider& embedder, const GeneratorTrainConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "train_generator: no training pairs");
  if (embedder.dimensionality() != cfg.model.cond_dim) {
    throw Error(ErrorCode::kInvalidConfig, "embedding width does not match generator cond_dim", "generator.cond_dim");
  }
  std::map<std::string, std::vector<float>> embedded;
  std::vector<TokenExample> examples;
  examples.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto it = embedded.find(p.description);
    if (it == embedded.end()) it = embedded.emplace(p.description, embedder.embed(p.description).vector).first;
    TokenExample ex;
    ex.cond = it->second;
    if (cfg.model.continuous) {
      ex.continuous = codec.encode(p.sequence).vectors;
    } else {
      ex.tokens = tokenize(p.sequence, codec);
    }
    examples.push_back(std::move(ex));
  }
  GeneratorTrainResult r =
      train_generator_tokens(examples, codec.geometry().codebook_size, codec.geometry().latent_dim, cfg);
  r.model.embedding_provider = embedder.name();
  return r;
}

PressureSequence generate_sequence(const GeneratorModel& model, const CodecModel& codec, const TextEmbedding& cond,
                                   std::uint32_t frames, const SamplingConfig& sampling) {
  if (model.codebook_size() != codec.geometry().codebook_size || model.latent_dim() != codec.geometry().latent_dim) {
    throw Error(ErrorCode::kArtifactMismatch, "generator vocabulary does not match the codec");
  }
  if (model.config().continuous) {
    LatentSequence lat;
    lat.vectors = model.generate_continuous(cond.vector);
    lat.downsample = codec.geometry().downsample;
    lat.original_frames = frames > 0 ? frames : static_cast<std::uint32_t>(lat.length() * lat.downsample);
    return codec.decode(lat);
  }
  return detokenize(model.generate(cond.vector, sampling), codec, frames);
}

PressureSequence generate_sequence(const GeneratorModel& model, const CodecModel& codec, const TextEmbedding& cond,
                                   std::uint32_t frames) {
  return generate_sequence(model, codec, cond, frames, model.config().sampling);
}

}  // namespace pressgen
