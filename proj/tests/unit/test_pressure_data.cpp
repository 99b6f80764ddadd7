// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "pressgen/error.hpp"
#include "pressgen/io_util.hpp"
#include "pressgen/metrics.hpp"
#include "pressgen/pressure_data.hpp"
#include "test_support.hpp"

namespace pressgen {
namespace {

using testing::code_of;
using testing::TempDir;

SynthConfig small_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.sequences_per_class = 3;
  cfg.classes = {ActivityClass::kBasic, ActivityClass::kYoga};
  return cfg;
}

TEST(SynthDataset, CountsMatchConfig) {
  TempDir dir;
  const DatasetManifest m = synth_dataset(small_config(7), dir.path());
  EXPECT_EQ(m.total_sequences(), 6u);
  EXPECT_EQ(m.total_frames(), 720u);
  const DatasetManifest reread = read_manifest(dir / "manifest.json");
  EXPECT_EQ(reread.total_frames(), 720u);
  ASSERT_EQ(reread.entries.size(), 6u);
  const PressureSequence s = load_entry(reread, reread.entries[0]);
  EXPECT_EQ(s.frames(), 120u);
  EXPECT_EQ(s.height(), 80);
  EXPECT_EQ(s.width(), 28);
  EXPECT_NO_THROW(s.validate());
}

TEST(SynthDataset, SameSeedGivesIdenticalFiles) {
  TempDir a, b;
  const DatasetManifest ma = synth_dataset(small_config(7), a.path());
  const DatasetManifest mb = synth_dataset(small_config(7), b.path());
  ASSERT_EQ(ma.entries.size(), mb.entries.size());
  for (std::size_t i = 0; i < ma.entries.size(); ++i) {
    EXPECT_EQ(read_binary_file(ma.resolve(ma.entries[i])), read_binary_file(mb.resolve(mb.entries[i])));
  }
  EXPECT_EQ(read_text_file(a / "manifest.json"), read_text_file(b / "manifest.json"));
}

TEST(SynthDataset, DifferentSeedsDiffer) {
  const auto a = synthesize_sequences(small_config(7));
  const auto b = synthesize_sequences(small_config(8));
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_diff |= !same_frames(a[i], b[i]);
  EXPECT_TRUE(any_diff);
}

TEST(SynthDataset, FramesObeyInvariants) {
  SynthConfig cfg;
  cfg.sequences_per_class = 2;
  for (const auto& s : synthesize_sequences(cfg)) {
    EXPECT_NO_THROW(s.validate());
    EXPECT_FALSE(s.description.empty());
    EXPECT_TRUE(s.subject_id.has_value());
  }
}

TEST(SynthDataset, InvalidConfigWritesNothing) {
  TempDir dir;
  SynthConfig cfg;
  cfg.sequences_per_class = 0;
  EXPECT_EQ(code_of([&] { synth_dataset(cfg, dir / "out"); }), ErrorCode::kInvalidConfig);
  EXPECT_FALSE(std::filesystem::exists(dir / "out"));
  SynthConfig radii;
  radii.blobs[0].radius_rows = 0.9;
  EXPECT_EQ(code_of([&] { radii.validate(); }), ErrorCode::kInvalidConfig);
}

// Nearest-centroid classifier on per-sequence mean frames, trained on one
// seed and evaluated on another.
TEST(SynthDataset, ClassesAreSeparableByNearestCentroid) {
  SynthConfig train_cfg;
  train_cfg.sequences_per_class = 8;
  train_cfg.seed = 1;
  SynthConfig test_cfg = train_cfg;
  test_cfg.seed = 2;
  auto mean_frame = [](const PressureSequence& s) {
    std::vector<double> m(s.frame_size(), 0.0);
    for (std::uint32_t t = 0; t < s.frames(); ++t) {
      const auto f = s.frame(t);
      for (std::size_t i = 0; i < f.size(); ++i) m[i] += f[i] / s.frames();
    }
    return m;
  };
  std::map<int, std::vector<double>> centroid;
  std::map<int, int> count;
  for (const auto& s : synthesize_sequences(train_cfg)) {
    const int c = static_cast<int>(s.class_label);
    auto m = mean_frame(s);
    auto& acc = centroid[c];
    acc.resize(m.size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) acc[i] += m[i];
    ++count[c];
  }
  for (auto& [c, v] : centroid) {
    for (double& x : v) x /= count[c];
  }
  std::vector<int> pred, truth;
  for (const auto& s : synthesize_sequences(test_cfg)) {
    const auto m = mean_frame(s);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& [c, v] : centroid) {
      double d = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) d += (m[i] - v[i]) * (m[i] - v[i]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    pred.push_back(best);
    truth.push_back(static_cast<int>(s.class_label));
  }
  EXPECT_GE(macro_f1(pred, truth, 4).macro_f1, 0.9);
}

TEST(Pseq, TwoByTwoLayout) {
  PressureSequence s(1, 2, 2, {0.0f, 1.0f, 2.0f, 3.0f});
  const auto bytes = encode_sequence(s);
  ASSERT_EQ(bytes.size(), kSequenceHeaderBytes + 16);
  EXPECT_EQ(std::string(reinterpret_cast<const char*>(bytes.data()), 5), "PSEQ1");
  ByteReader r(std::span<const std::byte>(bytes).subspan(5));
  EXPECT_EQ(r.get_u32(), 1u);
  EXPECT_EQ(r.get_u16(), 2);
  EXPECT_EQ(r.get_u16(), 2);
  for (float expected : {0.0f, 1.0f, 2.0f, 3.0f}) EXPECT_EQ(r.get_f32(), expected);
  // Little-endian 2.0f = 0x40000000.
  EXPECT_EQ(std::to_integer<int>(bytes[kSequenceHeaderBytes + 8 + 3]), 0x40);
  EXPECT_EQ(std::to_integer<int>(bytes[kSequenceHeaderBytes + 8]), 0x00);
}

TEST(Pseq, RoundTripIsBitExact) {
  TempDir dir;
  SynthConfig cfg;
  cfg.height = 10;
  cfg.width = 6;
  cfg.sequences_per_class = 2;
  for (const auto& s : synthesize_sequences(cfg)) {
    const auto path = dir / (s.activity_id + ".pseq");
    save_sequence(s, path);
    EXPECT_TRUE(same_frames(load_sequence(path), s));
  }
}

TEST(Pseq, LoadTakesMetadataFromManifest) {
  TempDir dir;
  const DatasetManifest m = synth_dataset(small_config(3), dir.path());
  const PressureSequence s = load_sequence(m.resolve(m.entries[4]));
  EXPECT_EQ(s.description, m.entries[4].description);
  EXPECT_EQ(s.class_label, m.entries[4].class_label);
  EXPECT_EQ(s.subject_id, m.entries[4].subject_id);
}

TEST(Pseq, NanIsRejectedAndNoFileWritten) {
  TempDir dir;
  PressureSequence s(1, 2, 2, {0.0f, std::numeric_limits<float>::quiet_NaN(), 0.0f, 0.0f});
  EXPECT_EQ(code_of([&] { save_sequence(s, dir / "x.pseq"); }), ErrorCode::kNonFinite);
  EXPECT_FALSE(std::filesystem::exists(dir / "x.pseq"));
}

TEST(Pseq, DistinctDecodeErrors) {
  PressureSequence s(10, 2, 2);
  auto bytes = encode_sequence(s);

  auto bad = bytes;
  for (int i = 0; i < 4; ++i) bad[static_cast<std::size_t>(i)] = std::byte{'X'};
  EXPECT_EQ(code_of([&] { decode_sequence(bad); }), ErrorCode::kBadMagic);

  auto short_payload = bytes;
  short_payload.resize(bytes.size() - 16);  // 9 of 10 frames
  EXPECT_EQ(code_of([&] { decode_sequence(short_payload); }), ErrorCode::kTruncated);

  auto extra = bytes;
  extra.resize(bytes.size() + 4);
  EXPECT_EQ(code_of([&] { decode_sequence(extra); }), ErrorCode::kDimensionMismatch);

  auto header_only = bytes;
  header_only.resize(7);
  EXPECT_EQ(code_of([&] { decode_sequence(header_only); }), ErrorCode::kTruncated);
}

TEST(Normalize, ScalesByCeiling) {
  PressureSequence s(1, 1, 3, {5000.0f, 0.0f, 2500.0f});
  const PressureSequence n = normalize(s);
  EXPECT_EQ(n.cells()[0], 1.0f);
  EXPECT_EQ(n.cells()[1], 0.0f);
  EXPECT_EQ(n.cells()[2], 0.5f);
  EXPECT_TRUE(n.normalized);
  EXPECT_EQ(code_of([&] { normalize(n); }), ErrorCode::kAlreadyNormalized);
  EXPECT_EQ(code_of([&] { denormalize(s); }), ErrorCode::kNotNormalized);
  EXPECT_TRUE(same_frames(denormalize(n), s));
}

TEST(Split, LargestRemainderCounts) {
  const std::array<double, 3> f = {0.8, 0.1, 0.1};
  EXPECT_EQ(allocate_counts(10, f), (std::vector<std::uint64_t>{8, 1, 1}));
  EXPECT_EQ(allocate_counts(86400, kDefaultSplitFractions), (std::vector<std::uint64_t>{66200, 5120, 15080}));
  const std::array<double, 3> bad = {0.5, 0.5, 0.1};
  EXPECT_EQ(code_of([&] { allocate_counts(10, bad); }), ErrorCode::kInvalidArgument);
}

TEST(Split, PartitionsAtSequenceGranularity) {
  DatasetManifest m;
  for (int i = 0; i < 10; ++i) m.entries.push_back({"s" + std::to_string(i) + ".pseq", "d", ActivityClass::kBasic, {}, 120});
  const DatasetManifest a = split_dataset(m, {0.8, 0.1, 0.1}, 5);
  const DatasetManifest b = split_dataset(m, {0.8, 0.1, 0.1}, 5);
  EXPECT_EQ(a.splits, b.splits);
  ASSERT_EQ(a.splits.size(), 10u);
  EXPECT_EQ(a.entries_in(Split::kTrain).size(), 8u);
  EXPECT_EQ(a.entries_in(Split::kTest).size(), 1u);
  EXPECT_EQ(a.entries_in(Split::kVal).size(), 1u);

  DatasetManifest tiny;
  tiny.entries = {m.entries[0], m.entries[1]};
  EXPECT_EQ(code_of([&] { split_dataset(tiny, kDefaultSplitFractions, 0); }), ErrorCode::kInvalidArgument);
}

TEST(Split, SizesWithinOneOfRequestedFractions) {
  for (std::size_t n : {3u, 7u, 19u, 64u, 101u}) {
    DatasetManifest m;
    for (std::size_t i = 0; i < n; ++i) m.entries.push_back({std::to_string(i), "d", ActivityClass::kDance, {}, 1});
    const DatasetManifest s = split_dataset(m, kDefaultSplitFractions, n);
    std::size_t total = 0;
    for (std::size_t p = 0; p < 3; ++p) {
      const auto got = s.entries_in(static_cast<Split>(p)).size();
      const double want = kDefaultSplitFractions[p] * static_cast<double>(n);
      EXPECT_LE(std::abs(static_cast<double>(got) - want), 1.0) << n;
      total += got;
    }
    EXPECT_EQ(total, n);
  }
}

TEST(Manifest, RoundTripKeepsSplitsAndTotals) {
  TempDir dir;
  DatasetManifest m = synth_dataset(small_config(1), dir.path());
  m = split_dataset(m, {0.5, 0.25, 0.25}, 3);
  write_manifest(m, dir / "split.json");
  const DatasetManifest r = read_manifest(dir / "split.json");
  EXPECT_EQ(r.splits, m.splits);
  EXPECT_EQ(r.total_frames(), m.total_frames());
  EXPECT_EQ(code_of([&] { read_manifest(dir / "absent.json"); }), ErrorCode::kMissingArtifact);
}

TEST(SensorGap, FloorAndCeiling) {
  PressureSequence s(1, 1, 4, {10.0f, 39.0f, 1000.0f, 4990.0f});
  const PressureSequence g = apply_sensor_gap(s, SensorGapConfig{0.10, 40.0}, 1);
  EXPECT_EQ(g.cells()[0], 0.0f);
  EXPECT_EQ(g.cells()[1], 0.0f);
  EXPECT_GE(g.cells()[2], 900.0f);
  EXPECT_LE(g.cells()[2], 1100.0f);
  EXPECT_LE(g.cells()[3], 5000.0f);
  EXPECT_NO_THROW(g.validate());
}

}  // namespace
}  // namespace pressgen
