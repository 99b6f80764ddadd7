// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Vector-quantized temporal autoencoder for pressure sequences.
//
// Frames are flattened to H*W channels and processed by 1-D convolutions over
// time. The encoder downsamples time by `downsample` (a power of two) and
// projects to `latent_dim`; each latent vector is snapped to its nearest
// codebook entry; the decoder mirrors the encoder back to H*W channels.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pressgen/nn.hpp"
#include "pressgen/pressure_data.hpp"
#include "pressgen/random.hpp"

namespace pressgen {

// ---------------------------------------------------------------------------
// Loss weighting

struct AnnealSchedule {
  std::int64_t warmup_steps = 1000;
  double w_r_start = 1.0;
  double w_r_end = 1.0;
  double w_q_start = 0.0;
  double w_q_end = 1.0;

  /// Weights must lie in [0,1], w_q must not decrease and w_r must not increase.
  void validate() const;
};

struct AnnealWeights {
  double w_r = 1.0;
  double w_q = 1.0;
};

/// Linear ramp from the start to the end values over warmup_steps, constant after.
AnnealWeights anneal_weights(std::int64_t step, const AnnealSchedule& schedule);

struct LossBreakdown {
  double total = 0.0;
  double reconstruction = 0.0;  // mean squared error over all cells
  double quantization = 0.0;    // commitment term
  double w_r = 1.0;
  double w_q = 1.0;
  std::int64_t step = 0;
};

LossBreakdown combine_losses(double reconstruction, double quantization, std::int64_t step,
                             const AnnealSchedule& schedule);

/// Reconstruction MSE between two equally shaped sequences combined with l_q.
LossBreakdown codec_loss(const PressureSequence& x, const PressureSequence& x_hat, double l_q, std::int64_t step,
                         const AnnealSchedule& schedule);

// ---------------------------------------------------------------------------
// Quantizer

struct LatentSequence {
  nn::Matrix vectors;  // latent_dim x length
  int downsample = 4;
  std::uint32_t original_frames = 0;

  int length() const { return static_cast<int>(vectors.cols()); }
  int dim() const { return static_cast<int>(vectors.rows()); }
};

struct Codebook {
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kDeadCodeThreshold = 1e-3;

  Codebook() = default;
  Codebook(int size, int dim, int horizon);

  int size() const { return static_cast<int>(entries.cols()); }
  int dim() const { return static_cast<int>(entries.rows()); }
  /// Smoothing factor 2 / (N + 1) of the moving averages.
  double alpha() const { return 2.0 / (static_cast<double>(horizon) + 1.0); }

  void validate() const;

  nn::Matrix entries;    // dim x size
  nn::Vector ema_counts; // size
  nn::Matrix ema_sums;   // dim x size
  std::vector<std::int64_t> usage;
  int horizon = 99;
};

struct QuantizeResult {
  std::vector<int> indices;
  LatentSequence quantized;
  double commitment = 0.0;  // mean over vectors of squared distance to the chosen entry
};

/// Index of the nearest entry by squared Euclidean distance; ties go to the smallest index.
int nearest_code(const Eigen::Ref<const nn::Vector>& v, const Codebook& cb);
QuantizeResult quantize(const LatentSequence& latents, const Codebook& cb);

/// Straight-through estimator: the gradient reaching the encoder output is the
/// gradient at the quantizer output, unchanged.
nn::Matrix straight_through_backward(const nn::Matrix& grad_quantized);

/// One moving-average step on per-code counts and sums from a batch of
/// latents (columns) and their assigned indices. Codes whose count falls
/// below kDeadCodeThreshold are re-seeded from batch latents, sampled with
/// probability proportional to squared distance from the nearest live code.
void ema_update(Codebook& cb, const nn::Matrix& batch_latents, std::span<const int> batch_indices, Rng& rng);

// ---------------------------------------------------------------------------
// Network

struct CodecGeometry {
  int height = kCanonicalHeight;
  int width = kCanonicalWidth;
  int downsample = 4;
  int latent_dim = 64;
  int codebook_size = 512;

  int channels() const { return height * width; }
  void validate() const;
  bool operator==(const CodecGeometry&) const = default;
};

struct CodecArchitecture {
  int hidden = 128;
  int residual_blocks = 3;
  bool residual = true;  // false: the same blocks without skip connections

  void validate() const;
};

struct ResidualBlockTrace {
  nn::Matrix input;
  nn::Matrix inner_pre;
  nn::ConvTrace conv_a, conv_b;
};

class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, int channels, bool skip);

  void init(Rng& rng);
  nn::Matrix forward(const nn::Matrix& x, ResidualBlockTrace* trace) const;
  nn::Matrix backward(const nn::Matrix& dy, const ResidualBlockTrace& trace);
  void collect(nn::ParameterList& out);

 private:
  nn::Conv1d conv_a_;  // kernel 3
  nn::Conv1d conv_b_;  // kernel 1
  bool skip_ = true;
};

struct EncoderTrace {
  nn::ConvTrace in;
  nn::Matrix in_pre;
  std::vector<nn::ConvTrace> down;
  std::vector<nn::Matrix> down_pre;
  std::vector<ResidualBlockTrace> blocks;
  nn::Matrix out_pre;
  nn::ConvTrace out;
};

struct DecoderTrace {
  nn::ConvTrace in;
  std::vector<ResidualBlockTrace> blocks;
  nn::Matrix blocks_out;
  std::vector<nn::ConvTrace> up;
  std::vector<nn::Matrix> up_pre;
  nn::ConvTrace out;
};

// An encoder/decoder pair with its codebook; the in-memory form of a codec
// checkpoint. Inference methods are const and safe to call concurrently.
class CodecModel {
 public:
  static constexpr std::string_view kCheckpointKind = "codec";

  CodecModel(const CodecGeometry& geometry, const CodecArchitecture& arch, int ema_horizon, std::uint64_t seed);

  const CodecGeometry& geometry() const { return geometry_; }
  const CodecArchitecture& architecture() const { return arch_; }
  const Codebook& codebook() const { return codebook_; }
  Codebook& codebook() { return codebook_; }

  /// Requires a normalized sequence with matching geometry.
  LatentSequence encode(const PressureSequence& seq) const;
  QuantizeResult quantize(const LatentSequence& latents) const { return pressgen::quantize(latents, codebook_); }
  /// Output has `original_frames` frames (or length * downsample if zero),
  /// cells clamped to [0, 1], normalized flag set.
  PressureSequence decode(const LatentSequence& latents) const;
  /// Decodes codebook entries for the given indices.
  PressureSequence decode_indices(std::span<const int> indices, std::uint32_t frames) const;
  PressureSequence reconstruct(const PressureSequence& seq) const;

  // Raw network passes used by training and gradient checks. `x` is
  // channels x padded_frames; the decoder returns unclamped channels x
  // (length * downsample).
  nn::Matrix to_padded_input(const PressureSequence& seq) const;
  nn::Matrix forward_encoder(const nn::Matrix& x, EncoderTrace* trace) const;
  nn::Matrix backward_encoder(const nn::Matrix& dz, const EncoderTrace& trace);
  nn::Matrix forward_decoder(const nn::Matrix& q, DecoderTrace* trace) const;
  nn::Matrix backward_decoder(const nn::Matrix& dy, const DecoderTrace& trace);

  nn::ParameterList parameters();
  nn::ParameterList encoder_parameters();
  nn::ParameterList decoder_parameters();

  nn::CheckpointContainer to_checkpoint() const;
  static CodecModel from_checkpoint(const nn::CheckpointContainer& ckpt);
  void save(const std::filesystem::path& path) const;
  static CodecModel load(const std::filesystem::path& path);

 private:
  void check_geometry(const PressureSequence& seq) const;
  int down_stages() const;

  CodecGeometry geometry_;
  CodecArchitecture arch_;
  Codebook codebook_;

  nn::Conv1d enc_in_;
  std::vector<nn::Conv1d> enc_down_;
  std::vector<ResidualBlock> enc_blocks_;
  nn::Conv1d enc_out_;

  nn::Conv1d dec_in_;
  std::vector<ResidualBlock> dec_blocks_;
  std::vector<nn::Conv1d> dec_up_;
  nn::Conv1d dec_out_;
};

/// Reflect-padded frame index used to extend a sequence of `frames` frames.
std::uint32_t reflect_index(std::int64_t index, std::uint32_t frames);

// ---------------------------------------------------------------------------
// Training

struct CodecTrainConfig {
  CodecGeometry geometry;
  CodecArchitecture architecture;
  bool annealing = true;  // false: weights fixed at the schedule's end values
  bool ema = true;        // false: codebook learned by gradient on ||sg(z) - e||^2
  int ema_horizon = 99;
  AnnealSchedule schedule;

  std::int64_t steps = 2000;
  int batch_size = 4;
  double learning_rate = 1e-3;
  double lr_decay = 0.5;  // multiplicative
  std::int64_t lr_decay_every = 1000;
  double grad_clip = 1.0;
  std::int64_t eval_every = 100;
  int patience = 10;          // evaluations without improvement before stopping; 0 disables
  double val_fraction = 0.125;  // used when the manifest carries no val split
  int folds = 10;             // k-fold mode only
  std::uint64_t seed = 0;

  void validate() const;
};

struct CodecValidationRecord {
  std::int64_t step = 0;
  double reconstruction = 0.0;
};

struct CodecTrainResult {
  CodecModel model;
  std::vector<LossBreakdown> history;  // one record per optimization step
  std::vector<CodecValidationRecord> validation;
  std::int64_t best_step = 0;
  double best_validation = 0.0;
  bool stopped_early = false;
};

/// Sequences must be normalized and share the configured geometry.
CodecTrainResult train_codec(std::span<const PressureSequence> train, std::span<const PressureSequence> validation,
                             const CodecTrainConfig& cfg);

/// Loads and normalizes the manifest's sequences; uses its train/val split
/// when present, else holds out val_fraction of the sequences.
CodecTrainResult train_codec(const DatasetManifest& manifest, const CodecTrainConfig& cfg);

struct CodecFold {
  CodecTrainResult result;
  std::vector<std::size_t> validation_indices;
};

/// One model per fold; fold f validates on indices i with i % folds == f after
/// a seeded shuffle.
std::vector<CodecFold> train_codec_kfold(std::span<const PressureSequence> data, const CodecTrainConfig& cfg);

/// Mean squared error of clamped reconstructions.
double reconstruction_mse(const CodecModel& model, std::span<const PressureSequence> data);

}  // namespace pressgen
