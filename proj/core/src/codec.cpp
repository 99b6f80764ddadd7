// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "pressgen/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pressgen/error.hpp"
#include "pressgen/hash.hpp"

namespace pressgen {

using nn::Matrix;
using nn::Vector;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Loss weighting

void AnnealSchedule::validate() const {
  auto in_unit = [](double w) { return w >= 0.0 && w <= 1.0; };
  if (warmup_steps < 0) throw Error(ErrorCode::kInvalidConfig, "warmup_steps must be >= 0", "schedule.warmup_steps");
  if (!in_unit(w_r_start) || !in_unit(w_r_end) || !in_unit(w_q_start) || !in_unit(w_q_end)) {
    throw Error(ErrorCode::kInvalidConfig, "annealing weights must lie in [0, 1]", "schedule");
  }
  if (w_q_end < w_q_start) throw Error(ErrorCode::kInvalidConfig, "w_q must not decrease", "schedule.w_q_end");
  if (w_r_end > w_r_start) throw Error(ErrorCode::kInvalidConfig, "w_r must not increase", "schedule.w_r_end");
}

AnnealWeights anneal_weights(std::int64_t step, const AnnealSchedule& schedule) {
  if (step < 0) throw Error(ErrorCode::kInvalidArgument, "training step must be >= 0", "step");
  const double frac = schedule.warmup_steps > 0
                          ? std::min(1.0, static_cast<double>(step) / static_cast<double>(schedule.warmup_steps))
                          : 1.0;
  return {schedule.w_r_start + (schedule.w_r_end - schedule.w_r_start) * frac,
          schedule.w_q_start + (schedule.w_q_end - schedule.w_q_start) * frac};
}

LossBreakdown combine_losses(double reconstruction, double quantization, std::int64_t step,
                             const AnnealSchedule& schedule) {
  const AnnealWeights w = anneal_weights(step, schedule);
  return {w.w_r * reconstruction + w.w_q * quantization, reconstruction, quantization, w.w_r, w.w_q, step};
}

LossBreakdown codec_loss(const PressureSequence& x, const PressureSequence& x_hat, double l_q, std::int64_t step,
                         const AnnealSchedule& schedule) {
  if (x.frames() != x_hat.frames() || !x.same_geometry(x_hat)) {
    throw Error(ErrorCode::kDimensionMismatch, "loss: sequences differ in shape");
  }
  const auto a = x.cells();
  const auto b = x_hat.cells();
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sse += d * d;
  }
  return combine_losses(sse / static_cast<double>(a.size()), l_q, step, schedule);
}

// ---------------------------------------------------------------------------
// Quantizer

Codebook::Codebook(int size, int dim, int horizon_n)
    : entries(Matrix::Zero(dim, size)),
      ema_counts(Vector::Zero(size)),
      ema_sums(Matrix::Zero(dim, size)),
      usage(static_cast<std::size_t>(size), 0),
      horizon(horizon_n) {
  validate();
}

void Codebook::validate() const {
  if (size() < 1 || dim() < 1) throw Error(ErrorCode::kEmptyInput, "codebook must have at least one entry");
  if (horizon < 1) throw Error(ErrorCode::kInvalidConfig, "EMA horizon N must be >= 1", "ema_horizon");
  if (!entries.allFinite()) throw Error(ErrorCode::kNonFinite, "codebook entries must be finite");
}

int nearest_code(const Eigen::Ref<const Vector>& v, const Codebook& cb) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cb.size(); ++k) {
    const double d = (v - cb.entries.col(k)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

QuantizeResult quantize(const LatentSequence& latents, const Codebook& cb) {
  if (cb.size() < 1) throw Error(ErrorCode::kEmptyInput, "quantize: empty codebook");
  if (latents.dim() != cb.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "quantize: latent width " + std::to_string(latents.dim()) +
                                                   " vs codebook width " + std::to_string(cb.dim()));
  }
  QuantizeResult r;
  r.quantized.downsample = latents.downsample;
  r.quantized.original_frames = latents.original_frames;
  r.quantized.vectors.resize(cb.dim(), latents.length());
  r.indices.resize(static_cast<std::size_t>(latents.length()));
  double sum = 0.0;
  for (int t = 0; t < latents.length(); ++t) {
    const int k = nearest_code(latents.vectors.col(t), cb);
    r.indices[static_cast<std::size_t>(t)] = k;
    r.quantized.vectors.col(t) = cb.entries.col(k);
    sum += (latents.vectors.col(t) - cb.entries.col(k)).squaredNorm();
  }
  r.commitment = latents.length() > 0 ? sum / latents.length() : 0.0;
  return r;
}

Matrix straight_through_backward(const Matrix& grad_quantized) { return grad_quantized; }

void ema_update(Codebook& cb, const Matrix& batch_latents, std::span<const int> batch_indices, Rng& rng) {
  if (static_cast<std::size_t>(batch_latents.cols()) != batch_indices.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "ema_update: latent/index count mismatch");
  }
  if (batch_indices.empty()) return;
  if (batch_latents.rows() != cb.dim()) throw Error(ErrorCode::kDimensionMismatch, "ema_update: latent width");

  const int K = cb.size();
  const double a = cb.alpha();
  Vector counts = Vector::Zero(K);
  Matrix sums = Matrix::Zero(cb.dim(), K);
  for (std::size_t j = 0; j < batch_indices.size(); ++j) {
    const int k = batch_indices[j];
    if (k < 0 || k >= K) throw Error(ErrorCode::kOutOfRange, "ema_update: code index out of range");
    counts(k) += 1.0;
    sums.col(k) += batch_latents.col(static_cast<Eigen::Index>(j));
  }
  cb.ema_counts = (1.0 - a) * cb.ema_counts + a * counts;
  cb.ema_sums = (1.0 - a) * cb.ema_sums + a * sums;
  for (int k = 0; k < K; ++k) {
    cb.usage[static_cast<std::size_t>(k)] += static_cast<std::int64_t>(counts(k));
    cb.entries.col(k) = cb.ema_sums.col(k) / (cb.ema_counts(k) + Codebook::kEpsilon);
  }

  // Dead-code re-seeding, k-means++ style.
  const Eigen::Index n = batch_latents.cols();
  Vector min_d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  bool any_live = false;
  for (int k = 0; k < K; ++k) {
    if (cb.ema_counts(k) < Codebook::kDeadCodeThreshold) continue;
    any_live = true;
    for (Eigen::Index j = 0; j < n; ++j) {
      min_d2(j) = std::min(min_d2(j), (batch_latents.col(j) - cb.entries.col(k)).squaredNorm());
    }
  }
  for (int k = 0; k < K; ++k) {
    if (cb.ema_counts(k) >= Codebook::kDeadCodeThreshold) continue;
    Eigen::Index pick = 0;
    const double total = any_live ? min_d2.sum() : 0.0;
    if (any_live && total > 0.0 && std::isfinite(total)) {
      double u = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= min_d2(pick);
        if (u < 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    cb.ema_counts(k) = a;
    cb.ema_sums.col(k) = a * batch_latents.col(pick);
    cb.entries.col(k) = cb.ema_sums.col(k) / (cb.ema_counts(k) + Codebook::kEpsilon);
    any_live = true;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = (batch_latents.col(j) - cb.entries.col(k)).squaredNorm();
      min_d2(j) = std::isfinite(min_d2(j)) ? std::min(min_d2(j), d) : d;
    }
  }
}

// ---------------------------------------------------------------------------
// Network

void CodecGeometry::validate() const {
  if (height < 1 || width < 1) throw Error(ErrorCode::kInvalidConfig, "grid must be non-empty", "geometry.height");
  if (downsample < 1 || !std::has_single_bit(static_cast<unsigned>(downsample))) {
    throw Error(ErrorCode::kInvalidConfig, "downsample must be a power of two", "geometry.downsample");
  }
  if (latent_dim < 1) throw Error(ErrorCode::kInvalidConfig, "latent_dim must be >= 1", "geometry.latent_dim");
  if (codebook_size < 1) {
    throw Error(ErrorCode::kInvalidConfig, "codebook_size must be >= 1", "geometry.codebook_size");
  }
}

void CodecArchitecture::validate() const {
  if (hidden < 1) throw Error(ErrorCode::kInvalidConfig, "hidden must be >= 1", "architecture.hidden");
  if (residual_blocks < 0) {
    throw Error(ErrorCode::kInvalidConfig, "residual_blocks must be >= 0", "architecture.residual_blocks");
  }
}

ResidualBlock::ResidualBlock(const std::string& name, int channels, bool skip)
    : conv_a_(name + ".conv_a", channels, channels, 3, 1, 1),
      conv_b_(name + ".conv_b", channels, channels, 1, 1, 0),
      skip_(skip) {}

void ResidualBlock::init(Rng& rng) {
  conv_a_.init(rng);
  conv_b_.init(rng, skip_ ? 0.5 : 1.0);
}

Matrix ResidualBlock::forward(const Matrix& x, ResidualBlockTrace* trace) const {
  Matrix a = conv_a_.forward(nn::relu(x), trace ? &trace->conv_a : nullptr);
  Matrix b = conv_b_.forward(nn::relu(a), trace ? &trace->conv_b : nullptr);
  if (trace) {
    trace->input = x;
    trace->inner_pre = std::move(a);
  }
  if (skip_) b += x;
  return b;
}

Matrix ResidualBlock::backward(const Matrix& dy, const ResidualBlockTrace& trace) {
  Matrix dh = conv_b_.backward(dy, trace.conv_b);
  dh = nn::relu_backward(dh, trace.inner_pre);
  dh = conv_a_.backward(dh, trace.conv_a);
  Matrix dx = nn::relu_backward(dh, trace.input);
  if (skip_) dx += dy;
  return dx;
}

void ResidualBlock::collect(nn::ParameterList& out) {
  conv_a_.collect(out);
  conv_b_.collect(out);
}

std::uint32_t reflect_index(std::int64_t index, std::uint32_t frames) {
  if (frames <= 1) return 0;
  const std::int64_t period = 2 * (static_cast<std::int64_t>(frames) - 1);
  std::int64_t m = index % period;
  if (m < 0) m += period;
  return static_cast<std::uint32_t>(m < frames ? m : period - m);
}

CodecModel::CodecModel(const CodecGeometry& geometry, const CodecArchitecture& arch, int ema_horizon,
                       std::uint64_t seed)
    : geometry_(geometry), arch_(arch) {
  geometry_.validate();
  arch_.validate();
  codebook_ = Codebook(geometry_.codebook_size, geometry_.latent_dim, ema_horizon);
  const int c = geometry_.channels();
  const int h = arch_.hidden;
  const int stages = down_stages();

  enc_in_ = nn::Conv1d("encoder.in", c, h, 3, 1, 1);
  for (int i = 0; i < stages; ++i) enc_down_.emplace_back("encoder.down" + std::to_string(i), h, h, 4, 2, 1);
  for (int i = 0; i < arch_.residual_blocks; ++i) {
    enc_blocks_.emplace_back("encoder.block" + std::to_string(i), h, arch_.residual);
  }
  enc_out_ = nn::Conv1d("encoder.out", h, geometry_.latent_dim, 3, 1, 1);

  dec_in_ = nn::Conv1d("decoder.in", geometry_.latent_dim, h, 3, 1, 1);
  for (int i = 0; i < arch_.residual_blocks; ++i) {
    dec_blocks_.emplace_back("decoder.block" + std::to_string(i), h, arch_.residual);
  }
  for (int i = 0; i < stages; ++i) dec_up_.emplace_back("decoder.up" + std::to_string(i), h, h, 3, 1, 1);
  dec_out_ = nn::Conv1d("decoder.out", h, c, 3, 1, 1);

  Rng rng(seed);
  enc_in_.init(rng);
  for (auto& l : enc_down_) l.init(rng);
  for (auto& b : enc_blocks_) b.init(rng);
  enc_out_.init(rng, 0.5);
  dec_in_.init(rng);
  for (auto& b : dec_blocks_) b.init(rng);
  for (auto& l : dec_up_) l.init(rng);
  dec_out_.init(rng, 0.5);
  for (Eigen::Index i = 0; i < codebook_.entries.size(); ++i) codebook_.entries.data()[i] = rng.normal(0.0, 0.1);
}

int CodecModel::down_stages() const { return std::countr_zero(static_cast<unsigned>(geometry_.downsample)); }

void CodecModel::check_geometry(const PressureSequence& seq) const {
  if (seq.height() != geometry_.height || seq.width() != geometry_.width) {
    throw Error(ErrorCode::kDimensionMismatch,
                "sequence grid " + std::to_string(seq.height()) + "x" + std::to_string(seq.width()) +
                    " does not match codec grid " + std::to_string(geometry_.height) + "x" +
                    std::to_string(geometry_.width));
  }
  if (!seq.normalized) throw Error(ErrorCode::kNotNormalized, "codec input must be normalized");
  if (seq.frames() == 0) throw Error(ErrorCode::kDimensionMismatch, "empty sequence");
}

Matrix CodecModel::to_padded_input(const PressureSequence& seq) const {
  check_geometry(seq);
  const std::uint32_t t = seq.frames();
  const auto l = static_cast<std::uint32_t>(geometry_.downsample);
  const std::uint32_t padded = (t + l - 1) / l * l;
  Matrix x(geometry_.channels(), padded);
  for (std::uint32_t j = 0; j < padded; ++j) {
    const auto f = seq.frame(reflect_index(j, t));
    for (std::size_t c = 0; c < f.size(); ++c) x(static_cast<Eigen::Index>(c), j) = f[c];
  }
  return x;
}

Matrix CodecModel::forward_encoder(const Matrix& x, EncoderTrace* tr) const {
  if (tr) {
    tr->down.resize(enc_down_.size());
    tr->down_pre.resize(enc_down_.size());
    tr->blocks.resize(enc_blocks_.size());
  }
  Matrix a = enc_in_.forward(x, tr ? &tr->in : nullptr);
  Matrix h = nn::relu(a);
  if (tr) tr->in_pre = std::move(a);
  for (std::size_t i = 0; i < enc_down_.size(); ++i) {
    a = enc_down_[i].forward(h, tr ? &tr->down[i] : nullptr);
    h = nn::relu(a);
    if (tr) tr->down_pre[i] = std::move(a);
  }
  for (std::size_t i = 0; i < enc_blocks_.size(); ++i) h = enc_blocks_[i].forward(h, tr ? &tr->blocks[i] : nullptr);
  Matrix z = enc_out_.forward(nn::relu(h), tr ? &tr->out : nullptr);
  if (tr) tr->out_pre = std::move(h);
  return z;
}

Matrix CodecModel::backward_encoder(const Matrix& dz, const EncoderTrace& tr) {
  Matrix dh = nn::relu_backward(enc_out_.backward(dz, tr.out), tr.out_pre);
  for (std::size_t i = enc_blocks_.size(); i-- > 0;) dh = enc_blocks_[i].backward(dh, tr.blocks[i]);
  for (std::size_t i = enc_down_.size(); i-- > 0;) {
    dh = enc_down_[i].backward(nn::relu_backward(dh, tr.down_pre[i]), tr.down[i]);
  }
  return enc_in_.backward(nn::relu_backward(dh, tr.in_pre), tr.in);
}

Matrix CodecModel::forward_decoder(const Matrix& q, DecoderTrace* tr) const {
  if (q.rows() != geometry_.latent_dim) throw Error(ErrorCode::kDimensionMismatch, "decoder input width");
  if (tr) {
    tr->blocks.resize(dec_blocks_.size());
    tr->up.resize(dec_up_.size());
    tr->up_pre.resize(dec_up_.size());
  }
  Matrix h = dec_in_.forward(q, tr ? &tr->in : nullptr);
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) h = dec_blocks_[i].forward(h, tr ? &tr->blocks[i] : nullptr);
  Matrix r = nn::relu(h);
  if (tr) tr->blocks_out = std::move(h);
  for (std::size_t i = 0; i < dec_up_.size(); ++i) {
    Matrix a = dec_up_[i].forward(nn::upsample2(r), tr ? &tr->up[i] : nullptr);
    r = nn::relu(a);
    if (tr) tr->up_pre[i] = std::move(a);
  }
  return dec_out_.forward(r, tr ? &tr->out : nullptr);
}

Matrix CodecModel::backward_decoder(const Matrix& dy, const DecoderTrace& tr) {
  Matrix dr = dec_out_.backward(dy, tr.out);
  for (std::size_t i = dec_up_.size(); i-- > 0;) {
    dr = nn::upsample2_backward(dec_up_[i].backward(nn::relu_backward(dr, tr.up_pre[i]), tr.up[i]));
  }
  Matrix dh = nn::relu_backward(dr, tr.blocks_out);
  for (std::size_t i = dec_blocks_.size(); i-- > 0;) dh = dec_blocks_[i].backward(dh, tr.blocks[i]);
  return dec_in_.backward(dh, tr.in);
}

LatentSequence CodecModel::encode(const PressureSequence& seq) const {
  LatentSequence lat;
  lat.vectors = forward_encoder(to_padded_input(seq), nullptr);
  lat.downsample = geometry_.downsample;
  lat.original_frames = seq.frames();
  if (!lat.vectors.allFinite()) throw Error(ErrorCode::kNumerical, "encoder produced non-finite latents");
  return lat;
}

PressureSequence CodecModel::decode(const LatentSequence& latents) const {
  if (latents.dim() != geometry_.latent_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "decode: latent width does not match the codec");
  }
  if (latents.downsample != geometry_.downsample) {
    throw Error(ErrorCode::kDimensionMismatch, "decode: downsample factor does not match the codec");
  }
  if (latents.length() < 1) throw Error(ErrorCode::kDimensionMismatch, "decode: empty latent sequence");
  const Matrix y = forward_decoder(latents.vectors, nullptr);
  const auto decoded = static_cast<std::uint32_t>(y.cols());
  const std::uint32_t frames = latents.original_frames > 0 ? latents.original_frames : decoded;
  PressureSequence out(frames, static_cast<std::uint16_t>(geometry_.height), static_cast<std::uint16_t>(geometry_.width));
  for (std::uint32_t t = 0; t < frames; ++t) {
    const auto src = static_cast<Eigen::Index>(t < decoded ? t : reflect_index(t, decoded));
    auto f = out.frame(t);
    for (std::size_t c = 0; c < f.size(); ++c) {
      f[c] = static_cast<float>(std::clamp(y(static_cast<Eigen::Index>(c), src), 0.0, 1.0));
    }
  }
  out.normalized = true;
  return out;
}

PressureSequence CodecModel::decode_indices(std::span<const int> indices, std::uint32_t frames) const {
  LatentSequence lat;
  lat.downsample = geometry_.downsample;
  lat.original_frames = frames;
  lat.vectors.resize(geometry_.latent_dim, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= codebook_.size()) {
      throw Error(ErrorCode::kOutOfRange, "code index " + std::to_string(indices[i]) + " out of range");
    }
    lat.vectors.col(static_cast<Eigen::Index>(i)) = codebook_.entries.col(indices[i]);
  }
  return decode(lat);
}

PressureSequence CodecModel::reconstruct(const PressureSequence& seq) const {
  return decode(quantize(encode(seq)).quantized);
}

nn::ParameterList CodecModel::encoder_parameters() {
  nn::ParameterList p;
  enc_in_.collect(p);
  for (auto& l : enc_down_) l.collect(p);
  for (auto& b : enc_blocks_) b.collect(p);
  enc_out_.collect(p);
  return p;
}

nn::ParameterList CodecModel::decoder_parameters() {
  nn::ParameterList p;
  dec_in_.collect(p);
  for (auto& b : dec_blocks_) b.collect(p);
  for (auto& l : dec_up_) l.collect(p);
  dec_out_.collect(p);
  return p;
}

nn::ParameterList CodecModel::parameters() {
  nn::ParameterList p = encoder_parameters();
  for (nn::Parameter* d : decoder_parameters()) p.push_back(d);
  return p;
}

nn::CheckpointContainer CodecModel::to_checkpoint() const {
  nn::CheckpointContainer ckpt;
  ckpt.kind = std::string(kCheckpointKind);
  json header = {
      {"geometry",
       {{"height", geometry_.height},
        {"width", geometry_.width},
        {"downsample", geometry_.downsample},
        {"latent_dim", geometry_.latent_dim},
        {"codebook_size", geometry_.codebook_size}}},
      {"architecture",
       {{"hidden", arch_.hidden}, {"residual_blocks", arch_.residual_blocks}, {"residual", arch_.residual}}},
      {"ema_horizon", codebook_.horizon},
  };
  ckpt.header_json = header.dump();
  nn::store_parameters(const_cast<CodecModel*>(this)->parameters(), ckpt);
  Matrix usage(codebook_.size(), 1);
  for (int k = 0; k < codebook_.size(); ++k) usage(k, 0) = static_cast<double>(codebook_.usage[static_cast<std::size_t>(k)]);
  ckpt.tensors.push_back({"codebook.entries", codebook_.entries});
  ckpt.tensors.push_back({"codebook.ema_counts", codebook_.ema_counts});
  ckpt.tensors.push_back({"codebook.ema_sums", codebook_.ema_sums});
  ckpt.tensors.push_back({"codebook.usage", usage});
  return ckpt;
}

CodecModel CodecModel::from_checkpoint(const nn::CheckpointContainer& ckpt) {
  if (ckpt.kind != kCheckpointKind) throw Error(ErrorCode::kArtifactMismatch, "not a codec checkpoint");
  CodecGeometry g;
  CodecArchitecture a;
  int horizon = 99;
  try {
    const json h = json::parse(ckpt.header_json);
    const auto& jg = h.at("geometry");
    g.height = jg.at("height");
    g.width = jg.at("width");
    g.downsample = jg.at("downsample");
    g.latent_dim = jg.at("latent_dim");
    g.codebook_size = jg.at("codebook_size");
    const auto& ja = h.at("architecture");
    a.hidden = ja.at("hidden");
    a.residual_blocks = ja.at("residual_blocks");
    a.residual = ja.at("residual");
    horizon = h.at("ema_horizon");
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kMalformedResponse, std::string("codec checkpoint header: ") + ex.what());
  }
  CodecModel model(g, a, horizon, 0);
  nn::restore_parameters(model.parameters(), ckpt);
  Codebook& cb = model.codebook_;
  const Matrix& entries = ckpt.tensor("codebook.entries");
  if (entries.rows() != g.latent_dim || entries.cols() != g.codebook_size) {
    throw Error(ErrorCode::kDimensionMismatch, "codebook shape inconsistent with checkpoint geometry");
  }
  cb.entries = entries;
  cb.ema_counts = ckpt.tensor("codebook.ema_counts").col(0);
  cb.ema_sums = ckpt.tensor("codebook.ema_sums");
  const Matrix& usage = ckpt.tensor("codebook.usage");
  for (int k = 0; k < cb.size(); ++k) cb.usage[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(usage(k, 0));
  cb.validate();
  return model;
}

void CodecModel::save(const std::filesystem::path& path) const { nn::write_checkpoint(path, to_checkpoint()); }

CodecModel CodecModel::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::read_checkpoint(path, std::string(kCheckpointKind)));
}

// ---------------------------------------------------------------------------
// Training

void CodecTrainConfig::validate() const {
  geometry.validate();
  architecture.validate();
  schedule.validate();
  auto fail = [](const char* field, const char* what) { throw Error(ErrorCode::kInvalidConfig, what, field); };
  if (ema_horizon < 1) fail("ema_horizon", "must be >= 1");
  if (steps < 1) fail("steps", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay", "must be in (0, 1]");
  if (lr_decay_every < 1) fail("lr_decay_every", "must be >= 1");
  if (eval_every < 1) fail("eval_every", "must be >= 1");
  if (patience < 0) fail("patience", "must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail("val_fraction", "must be in (0, 1)");
  if (folds < 2) fail("folds", "must be >= 2");
}

double reconstruction_mse(const CodecModel& model, std::span<const PressureSequence> data) {
  double sse = 0.0;
  double cells = 0.0;
  for (const auto& seq : data) {
    const PressureSequence rec = model.reconstruct(seq);
    const auto a = seq.cells();
    const auto b = rec.cells();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      sse += d * d;
    }
    cells += static_cast<double>(a.size());
  }
  return cells > 0.0 ? sse / cells : 0.0;
}

namespace {

struct SampleState {
  EncoderTrace enc;
  DecoderTrace dec;
  Matrix z;
  QuantizeResult q;
  Matrix y;
};

}  // namespace

CodecTrainResult train_codec(std::span<const PressureSequence> train, std::span<const PressureSequence> validation,
                             const CodecTrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "train_codec: no training sequences");

  CodecModel model(cfg.geometry, cfg.architecture, cfg.ema_horizon, mix_seed(cfg.seed, 1));
  for (const auto& s : train) model.to_padded_input(s);  // geometry / normalization check up front
  for (const auto& s : validation) model.to_padded_input(s);

  Rng rng(mix_seed(cfg.seed, 2));
  nn::ParameterList params = model.parameters();
  nn::Parameter codebook_param;
  if (!cfg.ema) {
    codebook_param.name = "codebook.entries";
    codebook_param.value = model.codebook().entries;
    codebook_param.zero_grad();
    params.push_back(&codebook_param);
  }
  nn::Adam adam(params);

  std::vector<Matrix> inputs;
  for (const auto& s : train) inputs.push_back(model.to_padded_input(s));

  CodecTrainResult result{model, {}, {}, 0, std::numeric_limits<double>::infinity(), false};
  std::optional<CodecModel> best;
  int evals_without_improvement = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<SampleState> states(static_cast<std::size_t>(cfg.batch_size));

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(step / cfg.lr_decay_every));
    const AnnealWeights w = cfg.annealing ? anneal_weights(step, cfg.schedule)
                                          : AnnealWeights{cfg.schedule.w_r_end, cfg.schedule.w_q_end};
    nn::zero_grad(params);

    std::vector<std::size_t> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor >= order.size()) {
        rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    double sse = 0.0, cells = 0.0, commit = 0.0, latents = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      SampleState& st = states[b];
      const PressureSequence& seq = train[batch[b]];
      st.z = model.forward_encoder(inputs[batch[b]], &st.enc);
      LatentSequence lat{st.z, cfg.geometry.downsample, seq.frames()};
      st.q = pressgen::quantize(lat, model.codebook());
      st.y = model.forward_decoder(st.q.quantized.vectors, &st.dec);
      const auto t = static_cast<Eigen::Index>(seq.frames());
      sse += (st.y.leftCols(t) - inputs[batch[b]].leftCols(t)).squaredNorm();
      cells += static_cast<double>(t * st.y.rows());
      commit += st.q.commitment * static_cast<double>(st.z.cols());
      latents += static_cast<double>(st.z.cols());
    }
    const double l_r = sse / cells;
    const double l_q = commit / latents;
    LossBreakdown loss{w.w_r * l_r + w.w_q * l_q, l_r, l_q, w.w_r, w.w_q, step};
    if (!std::isfinite(loss.total)) {
      throw Error(ErrorCode::kNumerical, "train_codec: non-finite loss at step " + std::to_string(step));
    }

    Matrix all_z(cfg.geometry.latent_dim, static_cast<Eigen::Index>(latents));
    std::vector<int> all_idx;
    Eigen::Index col = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      SampleState& st = states[b];
      const auto t = static_cast<Eigen::Index>(train[batch[b]].frames());
      Matrix dy = Matrix::Zero(st.y.rows(), st.y.cols());
      dy.leftCols(t) = (2.0 * w.w_r / cells) * (st.y.leftCols(t) - inputs[batch[b]].leftCols(t));
      Matrix dz = straight_through_backward(model.backward_decoder(dy, st.dec));
      const Matrix& qv = st.q.quantized.vectors;
      if (w.w_q != 0.0) dz += (2.0 * w.w_q / latents) * (st.z - qv);
      if (!cfg.ema) {
        for (Eigen::Index j = 0; j < st.z.cols(); ++j) {
          codebook_param.grad.col(st.q.indices[static_cast<std::size_t>(j)]) += (2.0 / latents) * (qv.col(j) - st.z.col(j));
        }
      }
      model.backward_encoder(dz, st.enc);
      all_z.middleCols(col, st.z.cols()) = st.z;
      col += st.z.cols();
      all_idx.insert(all_idx.end(), st.q.indices.begin(), st.q.indices.end());
    }
    nn::clip_grad_norm(params, cfg.grad_clip);
    adam.step(lr);
    if (cfg.ema) {
      ema_update(model.codebook(), all_z, all_idx, rng);
    } else {
      model.codebook().entries = codebook_param.value;
      for (std::size_t j = 0; j < all_idx.size(); ++j) model.codebook().usage[static_cast<std::size_t>(all_idx[j])] += 1;
    }
    result.history.push_back(loss);

    const bool last = step + 1 == cfg.steps;
    if (!validation.empty() && ((step + 1) % cfg.eval_every == 0 || last)) {
      const double v = reconstruction_mse(model, validation);
      result.validation.push_back({step, v});
      if (v < result.best_validation) {
        result.best_validation = v;
        result.best_step = step;
        best = model;
        evals_without_improvement = 0;
      } else if (cfg.patience > 0 && ++evals_without_improvement >= cfg.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }
  if (best) {
    result.model = std::move(*best);
  } else {
    result.model = model;
    result.best_step = cfg.steps - 1;
    result.best_validation = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

namespace {

std::vector<PressureSequence> load_normalized(const DatasetManifest& m, const std::vector<ManifestEntry>& entries) {
  std::vector<PressureSequence> out;
  for (const auto& e : entries) out.push_back(normalize(load_entry(m, e)));
  return out;
}

}  // namespace

CodecTrainResult train_codec(const DatasetManifest& manifest, const CodecTrainConfig& cfg) {
  cfg.validate();
  if (manifest.entries.empty()) throw Error(ErrorCode::kEmptyInput, "train_codec: empty manifest");
  std::vector<PressureSequence> train, val;
  if (!manifest.splits.empty()) {
    train = load_normalized(manifest, manifest.entries_in(Split::kTrain));
    val = load_normalized(manifest, manifest.entries_in(Split::kVal));
  } else {
    std::vector<std::size_t> order(manifest.entries.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(cfg.seed, 4));
    rng.shuffle(order.begin(), order.end());
    std::size_t n_val = order.size() < 2 ? 0
                                          : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                                                         cfg.val_fraction * static_cast<double>(order.size()))));
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto seq = normalize(load_entry(manifest, manifest.entries[order[i]]));
      (i < n_val ? val : train).push_back(std::move(seq));
    }
  }
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "train_codec: no training sequences in manifest");
  return train_codec(train, val, cfg);
}

std::vector<CodecFold> train_codec_kfold(std::span<const PressureSequence> data, const CodecTrainConfig& cfg) {
  cfg.validate();
  if (data.size() < static_cast<std::size_t>(cfg.folds)) {
    throw Error(ErrorCode::kInvalidArgument, "k-fold needs at least as many sequences as folds", "folds");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg.seed, 3));
  rng.shuffle(order.begin(), order.end());
  std::vector<CodecFold> folds;
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<PressureSequence> train, val;
    CodecFold fold{.result = {CodecModel(cfg.geometry, cfg.architecture, cfg.ema_horizon, 0), {}, {}, 0, 0.0, false},
                   .validation_indices = {}};
    for (std::size_t p = 0; p < order.size(); ++p) {
      if (static_cast<int>(p % static_cast<std::size_t>(cfg.folds)) == f) {
        val.push_back(data[order[p]]);
        fold.validation_indices.push_back(order[p]);
      } else {
        train.push_back(data[order[p]]);
      }
    }
    CodecTrainConfig fold_cfg = cfg;
    fold_cfg.seed = mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(f));
    fold.result = train_codec(train, val, fold_cfg);
    folds.push_back(std::move(fold));
  }
  return folds;
}

}  // namespace pressgen
