// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Fixed-width text embeddings used to condition the generator. The hashing
// provider works offline and is deterministic; the remote provider calls an
// HTTP embedding service. Either can sit behind an on-disk cache.

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pressgen {

inline constexpr int kTextEmbeddingDim = 512;

struct TextEmbedding {
  std::vector<float> vector;
  std::string provider_id;
  std::string source_text_hash;

  int dim() const { return static_cast<int>(vector.size()); }
};

/// Lower-cased, whitespace-collapsed, trimmed form of `text`.
std::string canonical_text(std::string_view text);
/// Hex FNV-1a of the canonical text.
std::string text_hash(std::string_view text);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  virtual int dimensionality() const = 0;
  virtual bool deterministic() const = 0;
  /// Throws Error(kEmptyInput) on blank text.
  virtual TextEmbedding embed(std::string_view text) const = 0;
};

// Signed feature hashing of unigrams and bigrams, L2-normalized.
class HashingEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashingEmbeddingProvider(int dim = kTextEmbeddingDim, std::uint64_t seed = 0);

  std::string name() const override;
  int dimensionality() const override { return dim_; }
  bool deterministic() const override { return true; }
  TextEmbedding embed(std::string_view text) const override;

 private:
  int dim_;
  std::uint64_t seed_;
};

struct RemoteProviderConfig {
  static constexpr const char* kUrlEnv = "PRESSGEN_EMBED_URL";
  static constexpr const char* kKeyEnv = "PRESSGEN_EMBED_KEY";

  std::string url;      // e.g. http://host:port/embed
  std::string api_key;  // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{5000};
  int dim = kTextEmbeddingDim;

  /// Fills url and api_key from the environment, keeping other fields.
  RemoteProviderConfig with_env() const;
};

// POST {"text": ...} -> {"embedding": [...]}. Failures raise kTimeout,
// kUnreachable or kMalformedResponse.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteProviderConfig cfg);

  std::string name() const override;
  int dimensionality() const override { return cfg_.dim; }
  bool deterministic() const override { return true; }
  TextEmbedding embed(std::string_view text) const override;

 private:
  RemoteProviderConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
};

/// Parses a service response body; exposed for tests.
std::vector<float> parse_embedding_response(std::string_view body, int expected_dim);

// Directory of <provider>/<text hash>.emb files holding little-endian f32.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);

  /// Hit returns the stored vector bit-exactly; corrupt entries log a warning
  /// and count as a miss.
  std::optional<TextEmbedding> lookup(const std::string& provider_id, const std::string& hash,
                                      int expected_dim) const;
  void store(const TextEmbedding& embedding) const;
  std::filesystem::path entry_path(const std::string& provider_id, const std::string& hash) const;

 private:
  std::filesystem::path dir_;
};

class CachingProvider final : public EmbeddingProvider {
 public:
  CachingProvider(std::shared_ptr<const EmbeddingProvider> inner, EmbeddingCache cache);

  std::string name() const override { return inner_->name(); }
  int dimensionality() const override { return inner_->dimensionality(); }
  bool deterministic() const override { return inner_->deterministic(); }
  TextEmbedding embed(std::string_view text) const override;

 private:
  std::shared_ptr<const EmbeddingProvider> inner_;
  EmbeddingCache cache_;
};

/// Tries `primary`; on a remote failure (timeout, unreachable, malformed)
/// logs a warning and uses `fallback`.
TextEmbedding embed_with_fallback(std::string_view text, const EmbeddingProvider& primary,
                                  const EmbeddingProvider& fallback);

double cosine_similarity(const TextEmbedding& a, const TextEmbedding& b);

}  // namespace pressgen
