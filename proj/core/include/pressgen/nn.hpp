// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Minimal layer library with hand-written backward passes. Activations are
// column-per-position matrices: a sequence of T vectors of width C is a C x T
// matrix. Layers are const during forward; gradients accumulate into the
// Parameter::grad of the layer that owns them.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pressgen/random.hpp"

namespace pressgen::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParameterList = std::vector<Parameter*>;

void zero_grad(const ParameterList& params);
/// Scales gradients so their global L2 norm is at most `max_norm`; returns the
/// norm before scaling.
double clip_grad_norm(const ParameterList& params, double max_norm);
std::size_t parameter_count(const ParameterList& params);
/// FNV-1a over all parameter values, for determinism checks.
std::uint64_t parameter_hash(const ParameterList& params);

// ---------------------------------------------------------------------------

struct ConvTrace {
  Matrix cols;
  int input_length = 0;
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, int in_channels, int out_channels, int kernel, int stride = 1, int padding = 0);

  /// He-uniform weights scaled by `gain`, zero bias.
  void init(Rng& rng, double gain = 1.0);

  int output_length(int input_length) const { return (input_length + 2 * padding_ - kernel_) / stride_ + 1; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  Matrix forward(const Matrix& x, ConvTrace* trace) const;
  /// Accumulates weight/bias gradients and returns dL/dx.
  Matrix backward(const Matrix& dy, const ConvTrace& trace);

  void collect(ParameterList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Parameter weight;  // out x (kernel * in), tap-major
  Parameter bias;    // out x 1

 private:
  Matrix im2col(const Matrix& x) const;

  int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, padding_ = 0;
};

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in_features, int out_features);

  void init(Rng& rng, double stddev);

  Matrix forward(const Matrix& x) const;
  /// `x` is the forward input.
  Matrix backward(const Matrix& dy, const Matrix& x);

  void collect(ParameterList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Parameter weight;  // out x in
  Parameter bias;    // out x 1
};

struct LayerNormTrace {
  Matrix normalized;
  Vector inv_std;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, int features);

  Matrix forward(const Matrix& x, LayerNormTrace* trace) const;
  Matrix backward(const Matrix& dy, const LayerNormTrace& trace);

  void collect(ParameterList& out) {
    out.push_back(&gain);
    out.push_back(&shift);
  }

  Parameter gain;
  Parameter shift;
  static constexpr double kEpsilon = 1e-5;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, int vocab, int features);

  void init(Rng& rng, double stddev);
  Matrix forward(std::span<const int> ids) const;
  void backward(const Matrix& dy, std::span<const int> ids);

  void collect(ParameterList& out) { out.push_back(&table); }

  Parameter table;  // features x vocab
};

// ---------------------------------------------------------------------------
// Element-wise helpers

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }
/// dy masked by (pre > 0).
Matrix relu_backward(const Matrix& dy, const Matrix& pre);
Matrix gelu(const Matrix& x);
Matrix gelu_backward(const Matrix& dy, const Matrix& pre);

/// Nearest-neighbour upsampling along time by 2.
Matrix upsample2(const Matrix& x);
Matrix upsample2_backward(const Matrix& dy);

/// Column-wise softmax.
Matrix softmax_columns(const Matrix& logits);

/// Mean cross-entropy of columns of `logits` against `targets`; fills
/// dlogits (scaled by `scale` / n) when non-null.
double cross_entropy(const Matrix& logits, std::span<const int> targets, Matrix* dlogits, double scale = 1.0);

// ---------------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

class Adam {
 public:
  Adam(ParameterList params, AdamConfig cfg = {});
  void step(double learning_rate);
  std::int64_t steps() const { return t_; }

 private:
  ParameterList params_;
  AdamConfig cfg_;
  std::vector<Matrix> m_, v_;
  std::int64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoint container: magic "PGCK", u32 format version, kind string, JSON
// header string, then named f64 tensors (column-major).

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct CheckpointContainer {
  std::string kind;
  std::string header_json;
  std::vector<NamedTensor> tensors;

  const Matrix& tensor(const std::string& name) const;
};

std::vector<std::byte> encode_checkpoint(const CheckpointContainer& ckpt,
                                         std::uint32_t version = kCheckpointFormatVersion);
CheckpointContainer decode_checkpoint(std::span<const std::byte> bytes, const std::string& expected_kind);
void write_checkpoint(const std::filesystem::path& path, const CheckpointContainer& ckpt);
CheckpointContainer read_checkpoint(const std::filesystem::path& path, const std::string& expected_kind);

/// Appends parameters as tensors / restores them by name (shape-checked).
void store_parameters(const ParameterList& params, CheckpointContainer& ckpt);
void restore_parameters(const ParameterList& params, const CheckpointContainer& ckpt);

}  // namespace pressgen::nn
