// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "pressgen/nn.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "pressgen/error.hpp"
#include "pressgen/hash.hpp"
#include "pressgen/io_util.hpp"

namespace pressgen::nn {

void zero_grad(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

double clip_grad_norm(const ParameterList& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-12);
    for (Parameter* p : params) p->grad *= scale;
  }
  return norm;
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::uint64_t parameter_hash(const ParameterList& params) {
  std::uint64_t h = kFnvOffsetBasis;
  for (const Parameter* p : params) {
    h = fnv1a64(std::as_bytes(std::span(p->value.data(), static_cast<std::size_t>(p->value.size()))), h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Conv1d

Conv1d::Conv1d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, int padding)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), padding_(padding) {
  weight.name = name + ".weight";
  weight.value = Matrix::Zero(out_channels, static_cast<Eigen::Index>(kernel) * in_channels);
  bias.name = name + ".bias";
  bias.value = Matrix::Zero(out_channels, 1);
  weight.zero_grad();
  bias.zero_grad();
}

void Conv1d::init(Rng& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(kernel_ * in_));
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value.data()[i] = rng.uniform(-bound, bound);
  bias.value.setZero();
}

Matrix Conv1d::im2col(const Matrix& x) const {
  const int t_in = static_cast<int>(x.cols());
  const int t_out = output_length(t_in);
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(kernel_) * in_, t_out);
  for (int t = 0; t < t_out; ++t) {
    for (int j = 0; j < kernel_; ++j) {
      const int src = t * stride_ + j - padding_;
      if (src >= 0 && src < t_in) cols.block(static_cast<Eigen::Index>(j) * in_, t, in_, 1) = x.col(src);
    }
  }
  return cols;
}

Matrix Conv1d::forward(const Matrix& x, ConvTrace* trace) const {
  if (x.rows() != in_) throw Error(ErrorCode::kDimensionMismatch, weight.name + ": channel mismatch");
  if (output_length(static_cast<int>(x.cols())) < 1) {
    throw Error(ErrorCode::kDimensionMismatch, weight.name + ": input too short");
  }
  Matrix y;
  if (kernel_ == 1 && stride_ == 1 && padding_ == 0) {
    y.noalias() = weight.value * x;
    if (trace) {
      trace->cols = x;
      trace->input_length = static_cast<int>(x.cols());
    }
  } else {
    Matrix cols = im2col(x);
    y.noalias() = weight.value * cols;
    if (trace) {
      trace->cols = std::move(cols);
      trace->input_length = static_cast<int>(x.cols());
    }
  }
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Conv1d::backward(const Matrix& dy, const ConvTrace& trace) {
  weight.grad.noalias() += dy * trace.cols.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  Matrix dcols;
  dcols.noalias() = weight.value.transpose() * dy;
  if (kernel_ == 1 && stride_ == 1 && padding_ == 0) return dcols;
  Matrix dx = Matrix::Zero(in_, trace.input_length);
  const int t_out = static_cast<int>(dy.cols());
  for (int t = 0; t < t_out; ++t) {
    for (int j = 0; j < kernel_; ++j) {
      const int src = t * stride_ + j - padding_;
      if (src >= 0 && src < trace.input_length) {
        dx.col(src) += dcols.block(static_cast<Eigen::Index>(j) * in_, t, in_, 1);
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear / LayerNorm / Embedding

Linear::Linear(const std::string& name, int in_features, int out_features) {
  weight.name = name + ".weight";
  weight.value = Matrix::Zero(out_features, in_features);
  bias.name = name + ".bias";
  bias.value = Matrix::Zero(out_features, 1);
  weight.zero_grad();
  bias.zero_grad();
}

void Linear::init(Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value.data()[i] = rng.normal(0.0, stddev);
  bias.value.setZero();
}

Matrix Linear::forward(const Matrix& x) const {
  if (x.rows() != weight.value.cols()) throw Error(ErrorCode::kDimensionMismatch, weight.name + ": input width");
  Matrix y;
  y.noalias() = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Linear::backward(const Matrix& dy, const Matrix& x) {
  weight.grad.noalias() += dy * x.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  Matrix dx;
  dx.noalias() = weight.value.transpose() * dy;
  return dx;
}

LayerNorm::LayerNorm(const std::string& name, int features) {
  gain.name = name + ".gain";
  gain.value = Matrix::Ones(features, 1);
  shift.name = name + ".shift";
  shift.value = Matrix::Zero(features, 1);
  gain.zero_grad();
  shift.zero_grad();
}

Matrix LayerNorm::forward(const Matrix& x, LayerNormTrace* trace) const {
  const double d = static_cast<double>(x.rows());
  Eigen::RowVectorXd mean = x.colwise().sum() / d;
  Matrix centered = x.rowwise() - mean;
  Eigen::RowVectorXd var = centered.cwiseAbs2().colwise().sum() / d;
  Vector inv_std = (var.array() + kEpsilon).rsqrt().transpose();
  Matrix normalized = centered * inv_std.asDiagonal();
  Matrix y = (normalized.array().colwise() * gain.value.col(0).array()).matrix();
  y.colwise() += shift.value.col(0);
  if (trace) {
    trace->normalized = std::move(normalized);
    trace->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix LayerNorm::backward(const Matrix& dy, const LayerNormTrace& trace) {
  const Matrix& xhat = trace.normalized;
  gain.grad.col(0) += dy.cwiseProduct(xhat).rowwise().sum();
  shift.grad.col(0) += dy.rowwise().sum();
  const double d = static_cast<double>(dy.rows());
  Matrix dxhat = (dy.array().colwise() * gain.value.col(0).array()).matrix();
  Eigen::RowVectorXd mean_dxhat = dxhat.colwise().sum() / d;
  Eigen::RowVectorXd mean_dxhat_xhat = dxhat.cwiseProduct(xhat).colwise().sum() / d;
  Matrix dx = dxhat.rowwise() - mean_dxhat;
  dx -= (xhat.array().rowwise() * mean_dxhat_xhat.array()).matrix();
  return dx * trace.inv_std.asDiagonal();
}

Embedding::Embedding(const std::string& name, int vocab, int features) {
  table.name = name + ".table";
  table.value = Matrix::Zero(features, vocab);
  table.zero_grad();
}

void Embedding::init(Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < table.value.size(); ++i) table.value.data()[i] = rng.normal(0.0, stddev);
}

Matrix Embedding::forward(std::span<const int> ids) const {
  Matrix out(table.value.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.value.cols()) {
      throw Error(ErrorCode::kOutOfRange, table.name + ": id " + std::to_string(ids[i]) + " out of range");
    }
    out.col(static_cast<Eigen::Index>(i)) = table.value.col(ids[i]);
  }
  return out;
}

void Embedding::backward(const Matrix& dy, std::span<const int> ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) table.grad.col(ids[i]) += dy.col(static_cast<Eigen::Index>(i));
}

// ---------------------------------------------------------------------------
// Element-wise

Matrix relu_backward(const Matrix& dy, const Matrix& pre) {
  return (pre.array() > 0.0).select(dy, 0.0);
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Matrix gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v))); });
}

Matrix gelu_backward(const Matrix& dy, const Matrix& pre) {
  Matrix d = pre.unaryExpr([](double v) {
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
  });
  return dy.cwiseProduct(d);
}

Matrix upsample2(const Matrix& x) {
  Matrix y(x.rows(), 2 * x.cols());
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    y.col(2 * t) = x.col(t);
    y.col(2 * t + 1) = x.col(t);
  }
  return y;
}

Matrix upsample2_backward(const Matrix& dy) {
  Matrix dx(dy.rows(), dy.cols() / 2);
  for (Eigen::Index t = 0; t < dx.cols(); ++t) dx.col(t) = dy.col(2 * t) + dy.col(2 * t + 1);
  return dx;
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    p.col(j) = (logits.col(j).array() - m).exp();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

double cross_entropy(const Matrix& logits, std::span<const int> targets, Matrix* dlogits, double scale) {
  if (static_cast<std::size_t>(logits.cols()) != targets.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cross_entropy: target count");
  }
  const double n = static_cast<double>(targets.size());
  Matrix p = softmax_columns(logits);
  double loss = 0.0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    loss -= std::log(std::max(p(targets[j], static_cast<Eigen::Index>(j)), 1e-300));
  }
  if (dlogits) {
    for (std::size_t j = 0; j < targets.size(); ++j) p(targets[j], static_cast<Eigen::Index>(j)) -= 1.0;
    *dlogits = p * (scale / n);
  }
  return loss / n;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(ParameterList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(double learning_rate) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
    const auto update = ((m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.epsilon)).matrix();
    if (cfg_.weight_decay > 0.0) p.value *= (1.0 - learning_rate * cfg_.weight_decay);
    p.value -= learning_rate * update;
  }
}

// ---------------------------------------------------------------------------
// Checkpoint container

namespace {
constexpr std::string_view kCheckpointMagic = "PGCK";
}

const Matrix& CheckpointContainer::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw Error(ErrorCode::kMissingArtifact, "checkpoint has no tensor '" + name + "'", name);
}

std::vector<std::byte> encode_checkpoint(const CheckpointContainer& ckpt, std::uint32_t version) {
  ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  w.put_u32(version);
  w.put_u32(static_cast<std::uint32_t>(ckpt.kind.size()));
  w.put_bytes(ckpt.kind);
  w.put_u32(static_cast<std::uint32_t>(ckpt.header_json.size()));
  w.put_bytes(ckpt.header_json);
  w.put_u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.put_u32(static_cast<std::uint32_t>(t.name.size()));
    w.put_bytes(t.name);
    w.put_u32(static_cast<std::uint32_t>(t.value.rows()));
    w.put_u32(static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) w.put_f64(t.value.data()[i]);
  }
  return std::move(w).take();
}

CheckpointContainer decode_checkpoint(std::span<const std::byte> bytes, const std::string& expected_kind) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0) {
    throw Error(ErrorCode::kBadMagic, "not a pressgen checkpoint");
  }
  ByteReader r(bytes.subspan(kCheckpointMagic.size()));
  const std::uint32_t version = r.get_u32();
  if (version != kCheckpointFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch, "checkpoint format version " + std::to_string(version) +
                                                 " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
  }
  CheckpointContainer ckpt;
  ckpt.kind = r.get_string(r.get_u32());
  if (!expected_kind.empty() && ckpt.kind != expected_kind) {
    throw Error(ErrorCode::kArtifactMismatch, "checkpoint kind '" + ckpt.kind + "', expected '" + expected_kind + "'");
  }
  ckpt.header_json = r.get_string(r.get_u32());
  const std::uint32_t count = r.get_u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = r.get_string(r.get_u32());
    const std::uint32_t rows = r.get_u32();
    const std::uint32_t cols = r.get_u32();
    t.value.resize(rows, cols);
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = r.get_f64();
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointContainer& ckpt) {
  write_binary_file(path, encode_checkpoint(ckpt));
}

CheckpointContainer read_checkpoint(const std::filesystem::path& path, const std::string& expected_kind) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingArtifact, "checkpoint not found: " + path.string(), path.string());
  }
  return decode_checkpoint(read_binary_file(path), expected_kind);
}

void store_parameters(const ParameterList& params, CheckpointContainer& ckpt) {
  for (const Parameter* p : params) ckpt.tensors.push_back({p->name, p->value});
}

void restore_parameters(const ParameterList& params, const CheckpointContainer& ckpt) {
  for (Parameter* p : params) {
    const Matrix& v = ckpt.tensor(p->name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "tensor '" + p->name + "' has the wrong shape", p->name);
    }
    p->value = v;
    p->zero_grad();
  }
}

}  // namespace pressgen::nn
