// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Evaluation metrics: Frechet distance between Gaussian fits of frame
// features, R^2 over all cells, R^2 of binarized contact masks, macro F1.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pressgen/codec.hpp"
#include "pressgen/nn.hpp"
#include "pressgen/pressure_data.hpp"

namespace pressgen {

inline constexpr double kDefaultContactThreshold = 0.02;
inline constexpr int kDefaultPcaComponents = 64;

struct GaussianStats {
  nn::Vector mu;
  nn::Matrix sigma;
  std::size_t n = 0;

  int dim() const { return static_cast<int>(mu.size()); }
};

/// Columns of `features` are samples. Unbiased covariance, symmetrized.
GaussianStats gaussian_stats(const nn::Matrix& features);

/// ||mu_a - mu_b||^2 + tr(A) + tr(B) - 2 tr((sqrt(A) B sqrt(A))^(1/2)).
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

enum class FeatureSpace : std::uint8_t { kCodecLatent, kPcaFlat };
std::string_view to_string(FeatureSpace s);
FeatureSpace parse_feature_space(std::string_view name);

/// Every frame as a column of H*W cells.
nn::Matrix flat_frame_features(std::span<const PressureSequence> seqs);
/// Pre-quantization encoder vectors of every sequence, one column per latent step.
nn::Matrix codec_latent_features(std::span<const PressureSequence> seqs, const CodecModel& codec);

struct PcaProjection {
  nn::Vector mean;
  nn::Matrix components;  // d x k, orthonormal columns by decreasing variance

  static PcaProjection fit(const nn::Matrix& samples, int k);
  nn::Matrix project(const nn::Matrix& samples) const;
};

struct FidOptions {
  FeatureSpace space = FeatureSpace::kCodecLatent;
  int pca_components = kDefaultPcaComponents;
  const CodecModel* codec = nullptr;  // required for kCodecLatent
};

/// Both sets must be non-empty and normalized. Fewer samples than feature
/// dimensions + 1 logs a warning.
double fid(std::span<const PressureSequence> real, std::span<const PressureSequence> generated,
           const FidOptions& options);

/// Element-wise paired sets of equal shapes. 1 - SS_res / SS_tot about the
/// global target mean; -inf when SS_tot = 0 < SS_res; 1 when both are 0.
double r2(std::span<const PressureSequence> pred, std::span<const PressureSequence> target);
double r2_values(std::span<const double> pred, std::span<const double> target);
/// r2 of the masks (cell > tau).
double binarized_r2(std::span<const PressureSequence> pred, std::span<const PressureSequence> target,
                    double tau = kDefaultContactThreshold);

struct F1Result {
  double macro_f1 = 0.0;
  std::vector<double> per_class;
  std::vector<int> absent_classes;  // scored 1 by convention
};

/// Labels are class ids in [0, num_classes).
F1Result macro_f1(std::span<const int> predicted, std::span<const int> truth, int num_classes);

struct MetricReport {
  std::optional<double> fid;
  std::optional<double> r2;
  std::optional<double> binarized_r2;
  std::optional<double> macro_f1;
  std::vector<std::string> class_names;
  std::vector<double> per_class_f1;
  std::vector<std::string> conventional_f1_classes;

  // Configuration
  double tau = kDefaultContactThreshold;
  std::string feature_space;
  int pca_components = 0;
  std::size_t reference_count = 0;
  std::size_t generated_count = 0;
  std::string label;

  nlohmann::json to_json() const;
};

/// fid, r2 and binarized_r2 of generated vs reference (paired in order).
MetricReport evaluate_sets(std::span<const PressureSequence> reference, std::span<const PressureSequence> generated,
                           const FidOptions& fid_options, double tau = kDefaultContactThreshold);

}  // namespace pressgen
