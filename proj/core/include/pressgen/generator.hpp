// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Text-conditioned autoregressive transformer over codebook indices.
//
// Vocabulary is the codec's K entries plus END = K. The projected text
// embedding occupies position 0; tokens follow. Pre-LN blocks with causal
// multi-head attention and a GELU MLP; a linear head gives K + 1 logits.
//
// With `continuous` set the same network regresses encoder latents instead
// (input projection from D, head to D, MSE loss, fixed output length). This
// is the baseline variant; it has no END token.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pressgen/codec.hpp"
#include "pressgen/nn.hpp"
#include "pressgen/text_embedding.hpp"

namespace pressgen {

struct TokenSequence {
  std::vector<int> tokens;
  int end_token = 0;  // = codebook size K

  bool ends_with_end() const { return !tokens.empty() && tokens.back() == end_token; }
  /// Tokens without the trailing END.
  std::span<const int> codes() const {
    return {tokens.data(), tokens.size() - (ends_with_end() ? 1 : 0)};
  }
  /// Throws unless all codes are in [0, K), END appears only last, and the
  /// length is at most max_len + 1.
  void validate(int max_len) const;
};

/// Codec indices of `seq` followed by END.
TokenSequence tokenize(const PressureSequence& seq, const CodecModel& codec);

/// Strips END, looks codes up in the codebook and decodes. Output has
/// target_frames frames when non-zero, else downsample * code count.
PressureSequence detokenize(const TokenSequence& tokens, const CodecModel& codec, std::uint32_t target_frames = 0);

enum class SamplingMode : std::uint8_t { kGreedy, kTopK };
std::string_view to_string(SamplingMode m);
SamplingMode parse_sampling_mode(std::string_view name);

struct SamplingConfig {
  SamplingMode mode = SamplingMode::kGreedy;
  int top_k = 10;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

struct GeneratorConfig {
  int layers = 4;
  int heads = 4;
  int width = 256;
  int max_len = 64;
  int cond_dim = kTextEmbeddingDim;
  bool continuous = false;
  SamplingConfig sampling;

  /// `codebook_size` is the codec's K.
  void validate(int codebook_size) const;
};

struct AttentionTrace {
  std::vector<nn::Matrix> probs;  // per (segment, head): keys x queries
};

struct BlockTrace {
  nn::Matrix input;
  nn::LayerNormTrace ln1;
  nn::Matrix ln1_out;
  nn::Matrix qkv;
  AttentionTrace attn;
  nn::Matrix attn_out;  // pre-projection concat of heads
  nn::Matrix mid;
  nn::LayerNormTrace ln2;
  nn::Matrix ln2_out;
  nn::Matrix fc1_pre;
  nn::Matrix fc1_act;
};

struct Segment {
  int offset = 0;
  int length = 0;
};

struct ForwardTrace {
  std::vector<Segment> segments;
  nn::Matrix cond_in;            // cond_dim x segments
  nn::Matrix cont_in;            // continuous inputs, D x positions (continuous mode)
  std::vector<int> token_ids;    // token input ids (discrete mode)
  std::vector<int> token_cols;   // column of each token input
  std::vector<int> positions;    // position index of every column
  std::vector<BlockTrace> blocks;
  nn::LayerNormTrace ln_f;
  nn::Matrix final_hidden;
};

// Incremental decoding state: cached keys and values per layer.
struct DecodeState {
  std::vector<nn::Matrix> keys, values;  // width x capacity
  int length = 0;
};

class GeneratorModel {
 public:
  static constexpr std::string_view kCheckpointKind = "generator";

  /// `latent_dim` is the codec's D (used by the continuous variant).
  GeneratorModel(const GeneratorConfig& cfg, int codebook_size, int latent_dim, std::uint64_t seed);

  const GeneratorConfig& config() const { return cfg_; }
  GeneratorConfig& config() { return cfg_; }
  int codebook_size() const { return codebook_size_; }
  int end_token() const { return codebook_size_; }
  int vocab_size() const { return codebook_size_ + 1; }
  int latent_dim() const { return latent_dim_; }

  // Provenance stored in the checkpoint.
  std::string codec_hash;
  std::string embedding_provider;
  int continuous_length = 0;  // latent steps produced by the continuous variant

  /// Logits over K + 1 for the position after `prefix` (codes only).
  nn::Vector next_token_logits(std::span<const int> prefix, std::span<const float> cond) const;

  /// Samples until END or max_len codes (then END is appended). The
  /// one-argument form uses the configured sampling settings.
  TokenSequence generate(std::span<const float> cond) const;
  TokenSequence generate(std::span<const float> cond, const SamplingConfig& sampling) const;

  /// Continuous variant: `continuous_length` latent vectors (D x L).
  nn::Matrix generate_continuous(std::span<const float> cond) const;

  // Batched teacher-forced pass. Segment s covers columns [offset, offset +
  // length): column 0 is the conditioning token, later columns take
  // `token_inputs` (discrete) or columns of `continuous_inputs`.
  nn::Matrix forward(const nn::Matrix& cond, std::span<const int> token_inputs, const nn::Matrix& continuous_inputs,
                     std::span<const Segment> segments, ForwardTrace* trace) const;
  void backward(const nn::Matrix& d_output, const ForwardTrace& trace);

  nn::ParameterList parameters();

  nn::CheckpointContainer to_checkpoint() const;
  static GeneratorModel from_checkpoint(const nn::CheckpointContainer& ckpt);
  void save(const std::filesystem::path& path) const;
  static GeneratorModel load(const std::filesystem::path& path);
  /// Throws Error(kArtifactMismatch) unless `hash` equals the recorded codec hash.
  void check_codec(const std::string& hash) const;

 private:
  struct Block {
    nn::LayerNorm ln1, ln2;
    nn::Linear qkv, proj, fc1, fc2;
  };

  nn::Vector step(DecodeState& state, const nn::Vector& input_embedding) const;
  nn::Vector embed_input(int token, std::span<const float> cond, int position) const;
  nn::Vector cond_vector(std::span<const float> cond) const;

  GeneratorConfig cfg_;
  int codebook_size_;
  int latent_dim_;

  nn::Linear cond_proj_;
  nn::Embedding token_embed_;
  nn::Linear cont_proj_;
  nn::Parameter positions_;  // width x max_len
  std::vector<Block> blocks_;
  nn::LayerNorm ln_f_;
  nn::Linear head_;
};

/// Index of the largest logit; ties go to the smallest index.
int argmax_token(const nn::Vector& logits);
/// Top-k sampling with temperature; candidates ranked by logit, ties by index.
int sample_top_k(const nn::Vector& logits, int k, double temperature, Rng& rng);

struct TokenExample {
  std::vector<float> cond;
  TokenSequence tokens;          // discrete mode
  nn::Matrix continuous;         // continuous mode: D x L encoder latents
};

struct GeneratorTrainConfig {
  GeneratorConfig model;
  std::int64_t steps = 1500;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double grad_clip = 1.0;
  std::int64_t warmup_steps = 50;  // linear learning-rate warmup
  std::uint64_t seed = 0;

  void validate(int codebook_size) const;
};

struct GeneratorTrainResult {
  GeneratorModel model;
  std::vector<double> loss_history;  // per step; cross-entropy or MSE
};

GeneratorTrainResult train_generator_tokens(std::span<const TokenExample> examples, int codebook_size,
                                            int latent_dim, const GeneratorTrainConfig& cfg);

struct TextSequencePair {
  std::string description;
  PressureSequence sequence;  // normalized
};

/// Embeds descriptions, tokenizes sequences with the frozen codec and trains.
GeneratorTrainResult train_generator(std::span<const TextSequencePair> pairs, const CodecModel& codec,
                                     const EmbeddingProvider& embedder, const GeneratorTrainConfig& cfg);

/// Text to normalized pressure sequence of `frames` frames (0: natural length).
/// Sampling follows the model config unless given; the continuous variant ignores it.
PressureSequence generate_sequence(const GeneratorModel& model, const CodecModel& codec,
                                   const TextEmbedding& cond, std::uint32_t frames);
PressureSequence generate_sequence(const GeneratorModel& model, const CodecModel& codec,
                                   const TextEmbedding& cond, std::uint32_t frames, const SamplingConfig& sampling);

}  // namespace pressgen
