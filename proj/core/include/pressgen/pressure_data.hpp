// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pressgen {

/// Upper end of the mat's measuring range, in mmHg.
inline constexpr double kSensorCeilingMmHg = 5000.0;

inline constexpr int kCanonicalHeight = 80;
inline constexpr int kCanonicalWidth = 28;
inline constexpr int kCanonicalFrames = 120;

enum class ActivityClass : std::uint8_t { kBasic = 0, kDance = 1, kYoga = 2, kWorkout = 3 };

inline constexpr std::array<ActivityClass, 4> kAllActivityClasses = {
    ActivityClass::kBasic, ActivityClass::kDance, ActivityClass::kYoga, ActivityClass::kWorkout};

std::string_view to_string(ActivityClass c);
/// Throws Error(kInvalidArgument) for names outside the closed set.
ActivityClass parse_activity_class(std::string_view name);

// A stack of T frames of H x W cells, stored frame-major then row-major. Cell
// values are mmHg when `normalized` is false and dimensionless in [0, 1]
// otherwise.
class PressureSequence {
 public:
  PressureSequence() = default;
  PressureSequence(std::uint32_t frames, std::uint16_t height, std::uint16_t width);
  PressureSequence(std::uint32_t frames, std::uint16_t height, std::uint16_t width,
                   std::vector<float> cells);

  std::uint32_t frames() const { return frames_; }
  std::uint16_t height() const { return height_; }
  std::uint16_t width() const { return width_; }
  std::size_t frame_size() const { return std::size_t{height_} * width_; }

  std::span<const float> cells() const { return cells_; }
  std::span<float> cells() { return cells_; }
  std::span<const float> frame(std::uint32_t t) const;
  std::span<float> frame(std::uint32_t t);

  float at(std::uint32_t t, std::uint16_t row, std::uint16_t col) const {
    return cells_[(std::size_t{t} * height_ + row) * width_ + col];
  }
  float& at(std::uint32_t t, std::uint16_t row, std::uint16_t col) {
    return cells_[(std::size_t{t} * height_ + row) * width_ + col];
  }

  bool same_geometry(const PressureSequence& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  /// Throws on an empty sequence, negative/non-finite cells, or cells above the
  /// ceiling of the current unit.
  void validate() const;

  std::string activity_id;
  ActivityClass class_label = ActivityClass::kBasic;
  std::string description;
  std::optional<std::string> subject_id;
  bool normalized = false;

 private:
  std::uint32_t frames_ = 0;
  std::uint16_t height_ = 0;
  std::uint16_t width_ = 0;
  std::vector<float> cells_;
};

/// Shape and contents equal; metadata is ignored.
bool same_frames(const PressureSequence& a, const PressureSequence& b);

// ---------------------------------------------------------------------------
// Manifest

enum class Split : std::uint8_t { kTrain, kTest, kVal };
std::string_view to_string(Split s);
Split parse_split(std::string_view name);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory, or absolute
  std::string description;
  ActivityClass class_label = ActivityClass::kBasic;
  std::optional<std::string> subject_id;
  std::uint32_t frames = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::map<std::string, Split> splits;  // keyed by entry path
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;  // not serialized; set on read/write

  std::uint64_t total_frames() const;
  std::size_t total_sequences() const { return entries.size(); }
  std::filesystem::path resolve(const ManifestEntry& e) const;
  /// Entries assigned to `s`, in manifest order.
  std::vector<ManifestEntry> entries_in(Split s) const;
};

inline constexpr std::string_view kManifestFileName = "manifest.json";

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// PSEQ1 binary format

inline constexpr std::string_view kSequenceMagic = "PSEQ1";
inline constexpr std::size_t kSequenceHeaderBytes = 5 + 4 + 2 + 2;

/// Writes magic, u32 T, u16 H, u16 W, then T*H*W little-endian f32. Rejects
/// non-finite cells before touching the file.
void save_sequence(const PressureSequence& seq, const std::filesystem::path& path);

/// Serialized bytes, exactly as save_sequence writes them.
std::vector<std::byte> encode_sequence(const PressureSequence& seq);

/// Reads a PSEQ1 file. Metadata comes from a manifest.json found next to the
/// file or one directory up, when that manifest lists the file.
PressureSequence load_sequence(const std::filesystem::path& path);
PressureSequence decode_sequence(std::span<const std::byte> bytes);

PressureSequence load_entry(const DatasetManifest& manifest, const ManifestEntry& entry);

// ---------------------------------------------------------------------------
// Preprocessing

/// Divides every cell by the sensor ceiling. Rejects already-normalized input.
PressureSequence normalize(const PressureSequence& seq);
/// Inverse of normalize; rejects raw input.
PressureSequence denormalize(const PressureSequence& seq);

/// Frame-count proportions of the reference corpus split (66,200 / 5,120 /
/// 15,080 of 86,400 frames).
inline constexpr std::array<double, 3> kDefaultSplitFractions = {66200.0 / 86400.0, 5120.0 / 86400.0,
                                                                 15080.0 / 86400.0};

/// Largest-remainder apportionment of `total` items; ties go to the earlier
/// partition. Fractions must be positive and sum to 1 within 1e-9.
std::vector<std::uint64_t> allocate_counts(std::uint64_t total, std::span<const double> fractions);

/// Seeded shuffle of whole sequences into train/test/val.
DatasetManifest split_dataset(const DatasetManifest& manifest, const std::array<double, 3>& fractions,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Procedural dataset

// Contact-blob parameters of one activity class. Radii and amplitude are
// fractions of the grid size so templates scale to any geometry.
struct BlobParams {
  double radius_rows = 0.05;
  double radius_cols = 0.06;
  double peak_mmhg = 2000.0;
  double trajectory_amplitude = 0.25;
};

struct SynthConfig {
  int sequences_per_class = 3;
  int frames_per_sequence = kCanonicalFrames;
  int height = kCanonicalHeight;
  int width = kCanonicalWidth;
  std::uint64_t seed = 0;
  std::vector<ActivityClass> classes{kAllActivityClasses.begin(), kAllActivityClasses.end()};
  /// Distinct text descriptions used per class (1..4); sequences cycle through them.
  int descriptions_per_class = 4;
  int subjects = 10;
  std::array<BlobParams, 4> blobs = default_blob_params();

  static std::array<BlobParams, 4> default_blob_params();
  /// Throws Error(kInvalidConfig) naming the offending field.
  void validate() const;
};

// Sensor domain gap applied to procedural data to stand in for a physical mat.
struct SensorGapConfig {
  double multiplicative_noise = 0.10;  // each cell scaled by U(1 - n, 1 + n)
  double floor_mmhg = 40.0;            // readings below this are reported as 0
};

/// Description text of variant `variant` (0..3) of a class.
std::string_view activity_description(ActivityClass c, int variant);

/// All sequences of the procedural dataset, in manifest order, raw units.
std::vector<PressureSequence> synthesize_sequences(const SynthConfig& cfg);

/// Writes sequences/<id>.pseq plus manifest.json under out_dir.
DatasetManifest synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

/// Noise, floor clipping and ceiling clipping on a raw sequence.
PressureSequence apply_sensor_gap(const PressureSequence& seq, const SensorGapConfig& gap,
                                  std::uint64_t seed);

/// Writes a manifest plus files for in-memory sequences (used for real-proxy
/// and generated sets).
DatasetManifest write_dataset(std::span<const PressureSequence> sequences,
                              const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace pressgen
