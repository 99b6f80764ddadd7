// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "pressgen/pressure_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pressgen/error.hpp"
#include "pressgen/hash.hpp"
#include "pressgen/io_util.hpp"
#include "pressgen/random.hpp"

namespace pressgen {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ActivityClass c) {
  switch (c) {
    case ActivityClass::kBasic: return "basic";
    case ActivityClass::kDance: return "dance";
    case ActivityClass::kYoga: return "yoga";
    case ActivityClass::kWorkout: return "workout";
  }
  return "unknown";
}

ActivityClass parse_activity_class(std::string_view name) {
  for (ActivityClass c : kAllActivityClasses) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown activity class '" + std::string(name) + "'",
              "class_label");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kVal: return "val";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  if (name == "val") return Split::kVal;
  throw Error(ErrorCode::kInvalidArgument, "unknown split '" + std::string(name) + "'", "splits");
}

// ---------------------------------------------------------------------------
// PressureSequence

PressureSequence::PressureSequence(std::uint32_t frames, std::uint16_t height, std::uint16_t width)
    : frames_(frames), height_(height), width_(width),
      cells_(std::size_t{frames} * height * width, 0.0f) {}

PressureSequence::PressureSequence(std::uint32_t frames, std::uint16_t height, std::uint16_t width,
                                   std::vector<float> cells)
    : frames_(frames), height_(height), width_(width), cells_(std::move(cells)) {
  if (cells_.size() != std::size_t{frames} * height * width) {
    throw Error(ErrorCode::kDimensionMismatch, "cell count does not match T*H*W");
  }
}

std::span<const float> PressureSequence::frame(std::uint32_t t) const {
  return std::span<const float>(cells_).subspan(t * frame_size(), frame_size());
}

std::span<float> PressureSequence::frame(std::uint32_t t) {
  return std::span<float>(cells_).subspan(t * frame_size(), frame_size());
}

void PressureSequence::validate() const {
  if (frames_ == 0 || height_ == 0 || width_ == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "sequence must have T>=1 and non-empty frames");
  }
  const double ceiling = normalized ? 1.0 : kSensorCeilingMmHg;
  for (float v : cells_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite pressure cell");
    if (v < 0.0f || v > ceiling) {
      throw Error(ErrorCode::kOutOfRange, "pressure cell outside [0, " + std::to_string(ceiling) + "]");
    }
  }
}

bool same_frames(const PressureSequence& a, const PressureSequence& b) {
  if (a.frames() != b.frames() || !a.same_geometry(b)) return false;
  const auto ca = a.cells();
  const auto cb = b.cells();
  return std::memcmp(ca.data(), cb.data(), ca.size_bytes()) == 0;
}

// ---------------------------------------------------------------------------
// Manifest

std::uint64_t DatasetManifest::total_frames() const {
  std::uint64_t total = 0;
  for (const auto& e : entries) total += e.frames;
  return total;
}

fs::path DatasetManifest::resolve(const ManifestEntry& e) const {
  fs::path p(e.path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<ManifestEntry> DatasetManifest::entries_in(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    auto it = splits.find(e.path);
    if (it != splits.end() && it->second == s) out.push_back(e);
  }
  return out;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json doc;
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"path", e.path},
                       {"description", e.description},
                       {"class_label", std::string(to_string(e.class_label))},
                       {"subject_id", e.subject_id ? json(*e.subject_id) : json(nullptr)},
                       {"frames", e.frames}});
  }
  doc["entries"] = std::move(entries);
  doc["seed"] = manifest.seed;
  doc["total_frames"] = manifest.total_frames();
  doc["total_sequences"] = manifest.total_sequences();
  if (!manifest.splits.empty()) {
    json splits = json::object();
    for (const auto& [p, s] : manifest.splits) splits[p] = std::string(to_string(s));
    doc["splits"] = std::move(splits);
  }
  write_text_file(path, doc.dump(2) + "\n");
}

DatasetManifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kMissingArtifact, "manifest not found: " + path.string(), path.string());
  }
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidConfig, "malformed manifest " + path.string() + ": " + ex.what(),
                path.string());
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    for (const auto& je : doc.at("entries")) {
      ManifestEntry e;
      e.path = je.at("path").get<std::string>();
      e.description = je.value("description", std::string{});
      e.class_label = parse_activity_class(je.at("class_label").get<std::string>());
      if (je.contains("subject_id") && !je["subject_id"].is_null()) {
        e.subject_id = je["subject_id"].get<std::string>();
      }
      e.frames = je.at("frames").get<std::uint32_t>();
      m.entries.push_back(std::move(e));
    }
    m.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("splits")) {
      for (const auto& [p, s] : doc["splits"].items()) m.splits[p] = parse_split(s.get<std::string>());
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidConfig, "malformed manifest " + path.string() + ": " + ex.what(),
                path.string());
  }
  return m;
}

// ---------------------------------------------------------------------------
// PSEQ1

std::vector<std::byte> encode_sequence(const PressureSequence& seq) {
  if (seq.frames() == 0 || seq.height() == 0 || seq.width() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "cannot serialize an empty sequence");
  }
  for (float v : seq.cells()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite pressure cell");
  }
  ByteWriter w;
  w.put_bytes(kSequenceMagic);
  w.put_u32(seq.frames());
  w.put_u16(seq.height());
  w.put_u16(seq.width());
  for (float v : seq.cells()) w.put_f32(v);
  return std::move(w).take();
}

void save_sequence(const PressureSequence& seq, const fs::path& path) {
  write_binary_file(path, encode_sequence(seq));
}

PressureSequence decode_sequence(std::span<const std::byte> bytes) {
  if (bytes.size() < kSequenceMagic.size()) {
    throw Error(ErrorCode::kTruncated, "file shorter than the PSEQ1 magic");
  }
  if (std::memcmp(bytes.data(), kSequenceMagic.data(), kSequenceMagic.size()) != 0) {
    throw Error(ErrorCode::kBadMagic, "not a PSEQ1 file");
  }
  if (bytes.size() < kSequenceHeaderBytes) throw Error(ErrorCode::kTruncated, "truncated PSEQ1 header");
  ByteReader r(bytes.subspan(kSequenceMagic.size()));
  const std::uint32_t t = r.get_u32();
  const std::uint16_t h = r.get_u16();
  const std::uint16_t w = r.get_u16();
  if (t == 0 || h == 0 || w == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "PSEQ1 header declares an empty dimension");
  }
  const std::size_t n = std::size_t{t} * h * w;
  const std::size_t payload = bytes.size() - kSequenceHeaderBytes;
  if (payload < n * 4) {
    throw Error(ErrorCode::kTruncated, "PSEQ1 payload holds " + std::to_string(payload / 4) +
                                           " cells, header declares " + std::to_string(n));
  }
  if (payload > n * 4) {
    throw Error(ErrorCode::kDimensionMismatch, "PSEQ1 payload larger than the declared T*H*W");
  }
  std::vector<float> cells(n);
  for (auto& v : cells) v = r.get_f32();
  return PressureSequence(t, h, w, std::move(cells));
}

namespace {

std::optional<ManifestEntry> find_in_manifest(const fs::path& manifest_path, const fs::path& file,
                                              DatasetManifest* out) {
  std::error_code ec;
  if (!fs::exists(manifest_path, ec)) return std::nullopt;
  DatasetManifest m;
  try {
    m = read_manifest(manifest_path);
  } catch (const Error&) {
    return std::nullopt;
  }
  const fs::path target = fs::weakly_canonical(file, ec);
  for (const auto& e : m.entries) {
    if (fs::weakly_canonical(m.resolve(e), ec) == target) {
      if (out) *out = m;
      return e;
    }
  }
  return std::nullopt;
}

}  // namespace

PressureSequence load_sequence(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kIo, "no such file: " + path.string(), path.string());
  PressureSequence seq = decode_sequence(read_binary_file(path));
  seq.activity_id = path.stem().string();
  const fs::path dir = path.parent_path();
  for (const fs::path& candidate : {dir / kManifestFileName, dir.parent_path() / kManifestFileName}) {
    if (auto e = find_in_manifest(candidate, path, nullptr)) {
      seq.description = e->description;
      seq.class_label = e->class_label;
      seq.subject_id = e->subject_id;
      break;
    }
  }
  return seq;
}

PressureSequence load_entry(const DatasetManifest& manifest, const ManifestEntry& entry) {
  const fs::path p = manifest.resolve(entry);
  if (!fs::exists(p)) {
    throw Error(ErrorCode::kMissingArtifact, "sequence file missing: " + p.string(), p.string());
  }
  PressureSequence seq = decode_sequence(read_binary_file(p));
  seq.activity_id = p.stem().string();
  seq.description = entry.description;
  seq.class_label = entry.class_label;
  seq.subject_id = entry.subject_id;
  return seq;
}

// ---------------------------------------------------------------------------
// Preprocessing

PressureSequence normalize(const PressureSequence& seq) {
  if (seq.normalized) throw Error(ErrorCode::kAlreadyNormalized, "sequence is already normalized");
  PressureSequence out = seq;
  for (float& v : out.cells()) v = static_cast<float>(static_cast<double>(v) / kSensorCeilingMmHg);
  out.normalized = true;
  return out;
}

PressureSequence denormalize(const PressureSequence& seq) {
  if (!seq.normalized) throw Error(ErrorCode::kNotNormalized, "sequence is not normalized");
  PressureSequence out = seq;
  for (float& v : out.cells()) v = static_cast<float>(static_cast<double>(v) * kSensorCeilingMmHg);
  out.normalized = false;
  return out;
}

std::vector<std::uint64_t> allocate_counts(std::uint64_t total, std::span<const double> fractions) {
  if (fractions.empty()) throw Error(ErrorCode::kInvalidArgument, "no fractions given", "fractions");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw Error(ErrorCode::kInvalidArgument, "fractions must be positive", "fractions");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "fractions must sum to 1", "fractions");
  }
  std::vector<std::uint64_t> counts(fractions.size());
  std::vector<double> remainders(fractions.size());
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double quota = static_cast<double>(total) * fractions[i];
    counts[i] = static_cast<std::uint64_t>(std::floor(quota));
    remainders[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(fractions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[order[k % order.size()]];
  return counts;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, const std::array<double, 3>& fractions,
                              std::uint64_t seed) {
  const auto counts = allocate_counts(manifest.entries.size(), fractions);
  if (manifest.entries.size() < fractions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "fewer sequences than partitions", "entries");
  }
  std::vector<std::size_t> order(manifest.entries.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  DatasetManifest out = manifest;
  out.splits.clear();
  constexpr std::array<Split, 3> kOrder = {Split::kTrain, Split::kTest, Split::kVal};
  std::size_t pos = 0;
  for (std::size_t part = 0; part < 3; ++part) {
    for (std::uint64_t k = 0; k < counts[part]; ++k, ++pos) {
      out.splits[manifest.entries[order[pos]].path] = kOrder[part];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Procedural dataset

std::array<BlobParams, 4> SynthConfig::default_blob_params() {
  return {{
      {0.045, 0.060, 1800.0, 0.25},  // basic
      {0.045, 0.060, 2000.0, 0.25},  // dance
      {0.050, 0.065, 1600.0, 0.02},  // yoga
      {0.045, 0.060, 1500.0, 0.10},  // workout
  }};
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& what) {
    throw Error(ErrorCode::kInvalidConfig, field + ": " + what, field);
  };
  if (sequences_per_class < 1) fail("sequences_per_class", "must be >= 1");
  if (frames_per_sequence < 1) fail("frames_per_sequence", "must be >= 1");
  if (height < 1 || height > 65535) fail("height", "must be in [1, 65535]");
  if (width < 1 || width > 65535) fail("width", "must be in [1, 65535]");
  if (classes.empty()) fail("classes", "must name at least one class");
  if (descriptions_per_class < 1 || descriptions_per_class > 4) fail("descriptions_per_class", "must be in [1, 4]");
  if (subjects < 1) fail("subjects", "must be >= 1");
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    const auto& b = blobs[i];
    const std::string prefix = "blobs." + std::string(to_string(kAllActivityClasses[i])) + ".";
    if (!(b.radius_rows > 0.0 && b.radius_rows < 0.5)) fail(prefix + "radius_rows", "must be in (0, 0.5)");
    if (!(b.radius_cols > 0.0 && b.radius_cols < 0.5)) fail(prefix + "radius_cols", "must be in (0, 0.5)");
    if (!(b.peak_mmhg > 0.0 && b.peak_mmhg <= kSensorCeilingMmHg)) {
      fail(prefix + "peak_mmhg", "must be in (0, 5000]");
    }
    if (!(b.trajectory_amplitude >= 0.0 && b.trajectory_amplitude < 0.5)) {
      fail(prefix + "trajectory_amplitude", "must be in [0, 0.5)");
    }
  }
}

std::string_view activity_description(ActivityClass c, int variant) {
  static constexpr std::array<std::array<std::string_view, 4>, 4> kText = {{
      {"a person walks forward slowly along the mat", "a person walks briskly back and forth",
       "a person marches forward lifting their knees", "a person walks backward carefully"},
      {"a person sways side to side to the music", "a person spins around in a small circle",
       "a person does quick side steps left and right", "a person jumps in place with both feet"},
      {"a person stands in tree pose on one leg", "a person holds warrior pose with feet wide apart",
       "a person stands still in mountain pose", "a person holds chair pose with bent knees"},
      {"a person does push-ups on the mat", "a person holds a plank and taps their shoulders",
       "a person does mountain climbers", "a person does lunges alternating legs"},
  }};
  return kText[static_cast<int>(c)][static_cast<std::size_t>(variant) % 4];
}

namespace {

struct Blob {
  double u = 0.5;  // row position as a fraction of height
  double v = 0.5;  // column position as a fraction of width
  double weight = 1.0;
  double size = 1.0;  // radius multiplier
};

// Per-sequence draw of the things that differ between repetitions of one
// activity: who performs it, where on the mat, and how fast.
struct Performance {
  double load = 1.0;
  double du = 0.0;
  double dv = 0.0;
  double tempo = 1.0;
  double phase = 0.0;
  double radius = 1.0;
};

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double triangle(double x) {
  // period 1, range [-1, 1]
  const double f = x - std::floor(x);
  return f < 0.5 ? 4.0 * f - 1.0 : 3.0 - 4.0 * f;
}

// Blob layout of one frame. `load` scales the whole body (0 in flight).
std::vector<Blob> pose(ActivityClass c, int variant, double t, const Performance& p,
                       const BlobParams& bp, double* load) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double amp = bp.trajectory_amplitude;
  std::vector<Blob> b;
  *load = 1.0;
  switch (c) {
    case ActivityClass::kBasic: {
      static constexpr double kStep[4] = {40.0, 24.0, 30.0, 48.0};
      static constexpr double kPath[4] = {120.0, 60.0, 120.0, 120.0};
      static constexpr double kAmp[4] = {1.0, 1.0, 0.6, -0.7};
      const double theta = kTwoPi * t * p.tempo / kStep[variant] + p.phase;
      const double body = 0.5 + kAmp[variant] * amp * triangle(t * p.tempo / kPath[variant] + p.phase / kTwoPi);
      const double stride = variant == 2 ? 0.02 : 0.08;
      const double lift = variant == 2 ? 0.9 : 0.7;
      b.push_back({body + 0.5 * stride * std::sin(theta), 0.41, clamp01(0.5 + lift * std::cos(theta))});
      b.push_back({body - 0.5 * stride * std::sin(theta), 0.59, clamp01(0.5 - lift * std::cos(theta))});
      break;
    }
    case ActivityClass::kDance: {
      static constexpr double kPeriod[4] = {30.0, 40.0, 30.0, 20.0};
      const double theta = kTwoPi * t * p.tempo / kPeriod[variant] + p.phase;
      switch (variant) {
        case 0:
          b.push_back({0.5, 0.32, clamp01(0.5 + 0.5 * std::sin(theta))});
          b.push_back({0.5, 0.68, clamp01(0.5 - 0.5 * std::sin(theta))});
          break;
        case 1:
          b.push_back({0.5 + 0.06 * std::cos(theta), 0.5 + 0.18 * std::sin(theta), 1.0});
          b.push_back({0.5 - 0.06 * std::cos(theta), 0.5 - 0.18 * std::sin(theta), 1.0});
          break;
        case 2: {
          const double body = 0.5 + amp * std::sin(theta);
          b.push_back({0.5, body - 0.1, clamp01(0.5 + 0.8 * std::sin(2.0 * theta))});
          b.push_back({0.5, body + 0.1, clamp01(0.5 - 0.8 * std::sin(2.0 * theta))});
          break;
        }
        default:
          *load = 1.6 * std::max(0.0, std::sin(theta));
          b.push_back({0.5, 0.33, 1.0});
          b.push_back({0.5, 0.67, 1.0});
          break;
      }
      break;
    }
    case ActivityClass::kYoga: {
      const double breath = 1.0 + 0.04 * std::sin(kTwoPi * t / 60.0 + p.phase);
      const double sway = amp * std::sin(kTwoPi * t * p.tempo / 90.0 + p.phase);
      *load = breath;
      switch (variant) {
        case 0: b.push_back({0.5 + sway, 0.5, 1.0}); break;
        case 1:
          b.push_back({0.44 + sway, 0.47, 0.55});
          b.push_back({0.56 + sway, 0.53, 0.45});
          break;
        case 2:
          b.push_back({0.5 + sway, 0.46, 0.5});
          b.push_back({0.5 + sway, 0.54, 0.5});
          break;
        default:
          b.push_back({0.53 + 2.0 * sway, 0.45, 0.5, 1.2});
          b.push_back({0.53 + 2.0 * sway, 0.55, 0.5, 1.2});
          break;
      }
      break;
    }
    case ActivityClass::kWorkout: {
      static constexpr double kPeriod[4] = {40.0, 30.0, 20.0, 40.0};
      const double theta = kTwoPi * t * p.tempo / kPeriod[variant] + p.phase;
      switch (variant) {
        case 0: {
          const double hands = 0.58 + 0.08 * std::sin(theta);
          b.push_back({0.22, 0.35, hands / 2.0, 0.8});
          b.push_back({0.22, 0.65, hands / 2.0, 0.8});
          b.push_back({0.85, 0.45, (1.0 - hands) / 2.0, 0.7});
          b.push_back({0.85, 0.55, (1.0 - hands) / 2.0, 0.7});
          break;
        }
        case 1: {
          const double tap = std::max(0.0, std::sin(theta));
          const double tap2 = std::max(0.0, -std::sin(theta));
          b.push_back({0.22, 0.35, 0.3 * (1.0 - tap), 0.8});
          b.push_back({0.22, 0.65, 0.3 * (1.0 - tap2), 0.8});
          b.push_back({0.85, 0.45, 0.2, 0.7});
          b.push_back({0.85, 0.55, 0.2, 0.7});
          break;
        }
        case 2: {
          const double left = std::max(0.0, std::sin(theta));
          const double right = std::max(0.0, -std::sin(theta));
          b.push_back({0.22, 0.35, 0.3, 0.8});
          b.push_back({0.22, 0.65, 0.3, 0.8});
          b.push_back({0.85 - amp * 1.5 * left, 0.45, 0.2 * (1.0 - 0.8 * left), 0.7});
          b.push_back({0.85 - amp * 1.5 * right, 0.55, 0.2 * (1.0 - 0.8 * right), 0.7});
          break;
        }
        default: {
          const double down = std::max(0.0, std::sin(theta));
          const bool swap = std::sin(0.5 * theta) < 0.0;
          const double front = swap ? 0.72 : 0.28;
          const double back = swap ? 0.28 : 0.72;
          b.push_back({front, 0.45, 0.6});
          b.push_back({back, 0.55, 0.4 * (1.0 - 0.6 * down), 0.8});
          b.push_back({back + (swap ? 0.08 : -0.08), 0.55, 0.3 * down, 0.7});
          break;
        }
      }
      break;
    }
  }
  for (auto& blob : b) {
    blob.u += p.du;
    blob.v += p.dv;
  }
  return b;
}

void render(const std::vector<Blob>& blobs, double load_scale, const BlobParams& bp, double radius_mult,
            int h, int w, std::span<float> out) {
  double total = 0.0;
  for (const auto& b : blobs) total += b.weight;
  std::fill(out.begin(), out.end(), 0.0f);
  if (total <= 1e-9 || load_scale <= 0.0) return;
  std::vector<double> acc(out.size(), 0.0);
  for (const auto& b : blobs) {
    if (b.weight <= 0.0) continue;
    // Two equally loaded feet each peak at bp.peak_mmhg for a reference subject.
    const double amplitude = bp.peak_mmhg * load_scale * 2.0 * b.weight / total;
    const double ru = bp.radius_rows * b.size * radius_mult;
    const double rv = bp.radius_cols * b.size * radius_mult;
    for (int r = 0; r < h; ++r) {
      const double du = ((r + 0.5) / h - b.u) / ru;
      for (int c = 0; c < w; ++c) {
        const double dv = ((c + 0.5) / w - b.v) / rv;
        const double e = std::exp(-0.5 * (du * du + dv * dv));
        if (e >= 0.01) acc[static_cast<std::size_t>(r) * w + c] += amplitude * e;
      }
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(std::min(acc[i], kSensorCeilingMmHg));
  }
}

std::string sequence_id(ActivityClass c, int variant, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_v%d_%03d", std::string(to_string(c)).c_str(), variant, index);
  return buf;
}

}  // namespace

std::vector<PressureSequence> synthesize_sequences(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<double> subject_mass(static_cast<std::size_t>(cfg.subjects));
  for (int s = 0; s < cfg.subjects; ++s) {
    Rng rng(mix_seed(cfg.seed, 0x5b0000ULL + static_cast<std::uint64_t>(s)));
    subject_mass[static_cast<std::size_t>(s)] = rng.uniform(50.0, 95.0);
  }

  std::vector<PressureSequence> out;
  for (ActivityClass c : cfg.classes) {
    const auto ci = static_cast<std::size_t>(c);
    const BlobParams& bp = cfg.blobs[ci];
    for (int i = 0; i < cfg.sequences_per_class; ++i) {
      Rng rng(mix_seed(cfg.seed, ci * 1000003ULL + static_cast<std::uint64_t>(i)));
      const int variant = i % cfg.descriptions_per_class;
      const auto subject = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.subjects)));
      Performance perf;
      perf.load = subject_mass[static_cast<std::size_t>(subject)] / 72.0;
      perf.du = rng.uniform(-0.03, 0.03);
      perf.dv = rng.uniform(-0.03, 0.03);
      perf.tempo = rng.uniform(0.85, 1.15);
      perf.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      perf.radius = rng.uniform(0.9, 1.1);

      PressureSequence seq(static_cast<std::uint32_t>(cfg.frames_per_sequence),
                           static_cast<std::uint16_t>(cfg.height), static_cast<std::uint16_t>(cfg.width));
      for (int t = 0; t < cfg.frames_per_sequence; ++t) {
        double load = 1.0;
        const auto blobs = pose(c, variant, static_cast<double>(t), perf, bp, &load);
        render(blobs, perf.load * load, bp, perf.radius, cfg.height, cfg.width,
               seq.frame(static_cast<std::uint32_t>(t)));
      }
      seq.activity_id = sequence_id(c, variant, i);
      seq.class_label = c;
      seq.description = std::string(activity_description(c, variant));
      char subj[32];
      std::snprintf(subj, sizeof(subj), "subject_%02d", subject + 1);
      seq.subject_id = subj;
      out.push_back(std::move(seq));
    }
  }
  return out;
}

DatasetManifest write_dataset(std::span<const PressureSequence> sequences, const fs::path& out_dir,
                              std::uint64_t seed) {
  ensure_directory(out_dir / "sequences");
  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.base_dir = out_dir;
  for (const auto& seq : sequences) {
    const std::string rel = "sequences/" + seq.activity_id + ".pseq";
    save_sequence(seq.normalized ? denormalize(seq) : seq, out_dir / rel);
    manifest.entries.push_back({rel, seq.description, seq.class_label, seq.subject_id, seq.frames()});
  }
  write_manifest(manifest, out_dir / kManifestFileName);
  return manifest;
}

DatasetManifest synth_dataset(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  ensure_directory(out_dir);
  const auto sequences = synthesize_sequences(cfg);
  return write_dataset(sequences, out_dir, cfg.seed);
}

PressureSequence apply_sensor_gap(const PressureSequence& seq, const SensorGapConfig& gap, std::uint64_t seed) {
  if (seq.normalized) throw Error(ErrorCode::kAlreadyNormalized, "sensor gap expects raw mmHg input");
  PressureSequence out = seq;
  Rng rng(seed);
  for (float& v : out.cells()) {
    double x = v * rng.uniform(1.0 - gap.multiplicative_noise, 1.0 + gap.multiplicative_noise);
    if (x < gap.floor_mmhg) x = 0.0;
    v = static_cast<float>(std::min(x, kSensorCeilingMmHg));
  }
  return out;
}

}  // namespace pressgen
