// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "pressgen/metrics.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "pressgen/error.hpp"
#include "pressgen/log.hpp"

namespace pressgen {

using nn::Matrix;
using nn::Vector;

GaussianStats gaussian_stats(const Matrix& features) {
  if (features.cols() < 2) throw Error(ErrorCode::kEmptyInput, "gaussian_stats needs at least 2 samples");
  if (!features.allFinite()) throw Error(ErrorCode::kNonFinite, "gaussian_stats: non-finite feature");
  GaussianStats s;
  s.n = static_cast<std::size_t>(features.cols());
  s.mu = features.rowwise().mean();
  const Matrix centered = features.colwise() - s.mu;
  Matrix cov = (centered * centered.transpose()) / static_cast<double>(features.cols() - 1);
  s.sigma = 0.5 * (cov + cov.transpose());
  return s;
}

namespace {

constexpr double kEigenTolerance = 1e-8;

// Eigen-decomposition of a symmetric PSD matrix with tiny negative
// eigenvalues clamped. `what` names the matrix in errors.
Eigen::SelfAdjointEigenSolver<Matrix> psd_eigen(const Matrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw Error(ErrorCode::kNumerical, std::string(what) + ": eigensolver failed");
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -kEigenTolerance * scale) {
    throw Error(ErrorCode::kNumerical, std::string(what) + " is not positive semi-definite (eigenvalue " +
                                           std::to_string(es.eigenvalues().minCoeff()) + ")");
  }
  return es;
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim() || a.sigma.rows() != a.dim() || b.sigma.rows() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "frechet_distance: dimensions " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
  }
  const auto ea = psd_eigen(a.sigma, "covariance");
  const Vector sqrt_vals = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix sqrt_a = ea.eigenvectors() * sqrt_vals.asDiagonal() * ea.eigenvectors().transpose();
  const auto em = psd_eigen(sqrt_a * b.sigma * sqrt_a, "covariance product");
  const double tr_covmean = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() - 2.0 * tr_covmean;
  if (d < -1e-6) throw Error(ErrorCode::kNumerical, "frechet_distance is negative: " + std::to_string(d));
  return std::max(0.0, d);
}

std::string_view to_string(FeatureSpace s) { return s == FeatureSpace::kCodecLatent ? "codec-latent" : "pca-flat"; }

FeatureSpace parse_feature_space(std::string_view name) {
  if (name == "codec-latent") return FeatureSpace::kCodecLatent;
  if (name == "pca-flat") return FeatureSpace::kPcaFlat;
  throw Error(ErrorCode::kInvalidConfig, "unknown feature space '" + std::string(name) + "'", "metrics.feature_space");
}

Matrix flat_frame_features(std::span<const PressureSequence> seqs) {
  Eigen::Index cols = 0;
  for (const auto& s : seqs) cols += s.frames();
  if (seqs.empty()) return {};
  const auto d = static_cast<Eigen::Index>(seqs.front().frame_size());
  Matrix out(d, cols);
  Eigen::Index c = 0;
  for (const auto& s : seqs) {
    if (static_cast<Eigen::Index>(s.frame_size()) != d) {
      throw Error(ErrorCode::kDimensionMismatch, "feature extraction: sequences differ in grid size");
    }
    for (std::uint32_t t = 0; t < s.frames(); ++t, ++c) {
      const auto f = s.frame(t);
      for (Eigen::Index i = 0; i < d; ++i) out(i, c) = f[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

Matrix codec_latent_features(std::span<const PressureSequence> seqs, const CodecModel& codec) {
  std::vector<Matrix> parts;
  Eigen::Index cols = 0;
  for (const auto& s : seqs) {
    parts.push_back(codec.encode(s).vectors);
    cols += parts.back().cols();
  }
  Matrix out(codec.geometry().latent_dim, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p;
    c += p.cols();
  }
  return out;
}

PcaProjection PcaProjection::fit(const Matrix& samples, int k) {
  if (samples.cols() < 2) throw Error(ErrorCode::kEmptyInput, "PCA needs at least 2 samples");
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "PCA component count must be >= 1", "metrics.pca_components");
  PcaProjection p;
  p.mean = samples.rowwise().mean();
  const Matrix centered = samples.colwise() - p.mean;
  const auto d = samples.rows();
  const Eigen::Index keep = std::min<Eigen::Index>(k, d);
  const Matrix cov = (centered * centered.transpose()) / static_cast<double>(samples.cols() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
  if (es.info() != Eigen::Success) throw Error(ErrorCode::kNumerical, "PCA eigensolver failed");
  // Eigenvalues ascend; take the last `keep` columns in reverse. Fix each
  // component's sign so its largest-magnitude entry is positive.
  p.components.resize(d, keep);
  for (Eigen::Index j = 0; j < keep; ++j) {
    Vector v = es.eigenvectors().col(d - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.components.col(j) = v;
  }
  return p;
}

Matrix PcaProjection::project(const Matrix& samples) const {
  if (samples.rows() != mean.size()) throw Error(ErrorCode::kDimensionMismatch, "PCA projection: input width");
  return components.transpose() * (samples.colwise() - mean);
}

double fid(std::span<const PressureSequence> real, std::span<const PressureSequence> generated,
           const FidOptions& options) {
  if (real.empty() || generated.empty()) throw Error(ErrorCode::kEmptyInput, "fid needs non-empty sets");
  Matrix fr, fg;
  if (options.space == FeatureSpace::kCodecLatent) {
    if (!options.codec) throw Error(ErrorCode::kMissingArtifact, "codec-latent FID requires a codec");
    fr = codec_latent_features(real, *options.codec);
    fg = codec_latent_features(generated, *options.codec);
  } else {
    const Matrix flat_r = flat_frame_features(real);
    const PcaProjection pca = PcaProjection::fit(flat_r, options.pca_components);
    fr = pca.project(flat_r);
    fg = pca.project(flat_frame_features(generated));
  }
  const auto d = fr.rows();
  if (fr.cols() < d + 1 || fg.cols() < d + 1) {
    logger()->warn("FID with {} / {} samples in {} dimensions: covariance is ill-conditioned", fr.cols(), fg.cols(), d);
  }
  return frechet_distance(gaussian_stats(fr), gaussian_stats(fg));
}

double r2_values(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw Error(ErrorCode::kDimensionMismatch, "r2: sizes differ");
  if (target.empty()) throw Error(ErrorCode::kEmptyInput, "r2: no values");
  double mean = 0.0;
  for (double t : target) mean += t;
  mean /= static_cast<double>(target.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ss_res += (target[i] - pred[i]) * (target[i] - pred[i]);
    ss_tot += (target[i] - mean) * (target[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - ss_res / ss_tot;
}

namespace {

template <typename Transform>
double paired_r2(std::span<const PressureSequence> pred, std::span<const PressureSequence> target, Transform f) {
  if (pred.size() != target.size()) throw Error(ErrorCode::kDimensionMismatch, "r2: set sizes differ");
  if (target.empty()) throw Error(ErrorCode::kEmptyInput, "r2: empty sets");
  std::vector<double> p, t;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (pred[i].frames() != target[i].frames() || !pred[i].same_geometry(target[i])) {
      throw Error(ErrorCode::kDimensionMismatch, "r2: sequence " + std::to_string(i) + " shapes differ");
    }
    for (float v : pred[i].cells()) p.push_back(f(v));
    for (float v : target[i].cells()) t.push_back(f(v));
  }
  return r2_values(p, t);
}

}  // namespace

double r2(std::span<const PressureSequence> pred, std::span<const PressureSequence> target) {
  return paired_r2(pred, target, [](float v) { return static_cast<double>(v); });
}

double binarized_r2(std::span<const PressureSequence> pred, std::span<const PressureSequence> target, double tau) {
  return paired_r2(pred, target, [tau](float v) { return static_cast<double>(v) > tau ? 1.0 : 0.0; });
}

F1Result macro_f1(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
  if (predicted.size() != truth.size()) throw Error(ErrorCode::kDimensionMismatch, "macro_f1: lengths differ");
  if (truth.empty()) throw Error(ErrorCode::kEmptyInput, "macro_f1: no labels");
  if (num_classes < 1) throw Error(ErrorCode::kInvalidArgument, "macro_f1: no classes");
  std::vector<long> tp(static_cast<std::size_t>(num_classes)), fp(tp.size()), fn(tp.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if (p < 0 || p >= num_classes || t < 0 || t >= num_classes) {
      throw Error(ErrorCode::kOutOfRange, "macro_f1: label outside the class set");
    }
    if (p == t) {
      ++tp[static_cast<std::size_t>(t)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }
  F1Result r;
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const auto i = static_cast<std::size_t>(c);
    const long denom = 2 * tp[i] + fp[i] + fn[i];
    double f1 = 0.0;
    if (denom == 0) {
      f1 = 1.0;
      r.absent_classes.push_back(c);
    } else {
      f1 = 2.0 * static_cast<double>(tp[i]) / static_cast<double>(denom);
    }
    r.per_class.push_back(f1);
    sum += f1;
  }
  r.macro_f1 = sum / num_classes;
  return r;
}

nlohmann::json MetricReport::to_json() const {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    if (!v) return nullptr;
    if (std::isinf(*v)) return *v < 0 ? "-inf" : "inf";
    return *v;
  };
  nlohmann::json j = {
      {"fid", opt(fid)},
      {"r2", opt(r2)},
      {"binarized_r2", opt(binarized_r2)},
      {"macro_f1", opt(macro_f1)},
      {"config",
       {{"tau", tau},
        {"feature_space", feature_space},
        {"pca_components", pca_components},
        {"reference_count", reference_count},
        {"generated_count", generated_count}}},
  };
  if (!label.empty()) j["label"] = label;
  if (!per_class_f1.empty()) {
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t i = 0; i < per_class_f1.size(); ++i) {
      per[i < class_names.size() ? class_names[i] : std::to_string(i)] = per_class_f1[i];
    }
    j["per_class_f1"] = per;
    j["conventional_f1_classes"] = conventional_f1_classes;
  }
  return j;
}

MetricReport evaluate_sets(std::span<const PressureSequence> reference, std::span<const PressureSequence> generated,
                           const FidOptions& fid_options, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorCode::kInvalidConfig, "tau must lie in (0, 1)", "metrics.tau");
  MetricReport r;
  r.fid = fid(reference, generated, fid_options);
  r.r2 = pressgen::r2(generated, reference);
  r.binarized_r2 = pressgen::binarized_r2(generated, reference, tau);
  r.tau = tau;
  r.feature_space = std::string(to_string(fid_options.space));
  r.pca_components = fid_options.space == FeatureSpace::kPcaFlat ? fid_options.pca_components : 0;
  r.reference_count = reference.size();
  r.generated_count = generated.size();
  return r;
}

}  // namespace pressgen
