// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

#include "pressgen/text_embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pressgen/error.hpp"
#include "pressgen/hash.hpp"
#include "pressgen/io_util.hpp"
#include "pressgen/log.hpp"

namespace pressgen {

std::string canonical_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string text_hash(std::string_view text) { return to_hex(fnv1a64(canonical_text(text))); }

namespace {

void require_text(std::string_view text) {
  if (canonical_text(text).empty()) throw Error(ErrorCode::kEmptyInput, "cannot embed empty text", "text");
}

std::vector<std::string> tokenize(const std::string& canonical) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : canonical) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

HashingEmbeddingProvider::HashingEmbeddingProvider(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw Error(ErrorCode::kInvalidConfig, "embedding dimensionality must be >= 1", "embedding.dim");
}

std::string HashingEmbeddingProvider::name() const {
  return "hash-ngram-v1-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

TextEmbedding HashingEmbeddingProvider::embed(std::string_view text) const {
  require_text(text);
  const std::string canon = canonical_text(text);
  const std::uint64_t basis = kFnvOffsetBasis ^ mix_seed(seed_, 0);
  std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
  auto add = [&](const std::string& feature, double weight) {
    const std::uint64_t h = fnv1a64(feature, basis);
    acc[h % static_cast<std::uint64_t>(dim_)] += (h >> 63) ? -weight : weight;
  };
  const auto tokens = tokenize(canon);
  if (tokens.empty()) add("t:" + canon, 1.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add("u:" + tokens[i], 1.0);
    if (i + 1 < tokens.size()) add("b:" + tokens[i] + ' ' + tokens[i + 1], 1.0);
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  if (norm == 0.0) {
    acc[fnv1a64(canon, basis) % static_cast<std::uint64_t>(dim_)] = 1.0;
    norm = 1.0;
  }
  norm = std::sqrt(norm);
  TextEmbedding e;
  e.vector.reserve(acc.size());
  for (double v : acc) e.vector.push_back(static_cast<float>(v / norm));
  e.provider_id = name();
  e.source_text_hash = text_hash(text);
  return e;
}

// ---------------------------------------------------------------------------

RemoteProviderConfig RemoteProviderConfig::with_env() const {
  RemoteProviderConfig out = *this;
  if (const char* url_env = std::getenv(kUrlEnv)) out.url = url_env;
  if (const char* key_env = std::getenv(kKeyEnv)) out.api_key = key_env;
  return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteProviderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.dim < 1) throw Error(ErrorCode::kInvalidConfig, "embedding dimensionality must be >= 1", "embedding.dim");
  const std::string prefix = "http://";
  if (cfg_.url.rfind(prefix, 0) != 0) {
    throw Error(ErrorCode::kInvalidConfig, "remote embedding URL must start with http://", "embedding.url");
  }
  const auto slash = cfg_.url.find('/', prefix.size());
  scheme_host_port_ = cfg_.url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : cfg_.url.substr(slash);
}

std::string RemoteEmbeddingProvider::name() const { return "remote-" + to_hex(fnv1a64(cfg_.url)); }

std::vector<float> parse_embedding_response(std::string_view body, int expected_dim) {
  nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("embedding") || !doc["embedding"].is_array()) {
    throw Error(ErrorCode::kMalformedResponse, "embedding response is not {\"embedding\": [...]}");
  }
  const auto& arr = doc["embedding"];
  if (static_cast<int>(arr.size()) != expected_dim) {
    throw Error(ErrorCode::kMalformedResponse, "embedding has " + std::to_string(arr.size()) + " values, expected " +
                                                   std::to_string(expected_dim));
  }
  std::vector<float> out;
  out.reserve(arr.size());
  double norm = 0.0;
  for (const auto& v : arr) {
    if (!v.is_number()) throw Error(ErrorCode::kMalformedResponse, "embedding contains a non-number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw Error(ErrorCode::kMalformedResponse, "embedding contains a non-finite value");
    norm += d * d;
  }
  if (norm <= 0.0) throw Error(ErrorCode::kMalformedResponse, "embedding is the zero vector");
  norm = std::sqrt(norm);
  for (const auto& v : arr) out.push_back(static_cast<float>(v.get<double>() / norm));
  return out;
}

TextEmbedding RemoteEmbeddingProvider::embed(std::string_view text) const {
  require_text(text);
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  client.set_connection_timeout(static_cast<time_t>(secs.count()), static_cast<time_t>(usecs.count()));
  client.set_read_timeout(static_cast<time_t>(secs.count()), static_cast<time_t>(usecs.count()));
  client.set_write_timeout(static_cast<time_t>(secs.count()), static_cast<time_t>(usecs.count()));
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  const std::string body = nlohmann::json{{"text", std::string(text)}}.dump();
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) {
    const httplib::Error err = res.error();
    const std::string what = "embedding service " + cfg_.url + ": " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw Error(ErrorCode::kTimeout, what);
    }
    throw Error(ErrorCode::kUnreachable, what);
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kMalformedResponse, "embedding service returned HTTP " + std::to_string(res->status));
  }
  TextEmbedding e;
  e.vector = parse_embedding_response(res->body, cfg_.dim);
  e.provider_id = name();
  e.source_text_hash = text_hash(text);
  return e;
}

// ---------------------------------------------------------------------------

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path EmbeddingCache::entry_path(const std::string& provider_id, const std::string& hash) const {
  return dir_ / provider_id / (hash + ".emb");
}

std::optional<TextEmbedding> EmbeddingCache::lookup(const std::string& provider_id, const std::string& hash,
                                                    int expected_dim) const {
  const auto path = entry_path(provider_id, hash);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const auto bytes = read_binary_file(path);
    if (bytes.size() != static_cast<std::size_t>(expected_dim) * 4) {
      logger()->warn("ignoring corrupt embedding cache entry {} ({} bytes)", path.string(), bytes.size());
      return std::nullopt;
    }
    ByteReader r(bytes);
    TextEmbedding e;
    e.vector.resize(static_cast<std::size_t>(expected_dim));
    for (auto& v : e.vector) {
      v = r.get_f32();
      if (!std::isfinite(v)) {
        logger()->warn("ignoring corrupt embedding cache entry {} (non-finite value)", path.string());
        return std::nullopt;
      }
    }
    e.provider_id = provider_id;
    e.source_text_hash = hash;
    return e;
  } catch (const std::exception& ex) {
    logger()->warn("ignoring unreadable embedding cache entry {}: {}", path.string(), ex.what());
    return std::nullopt;
  }
}

void EmbeddingCache::store(const TextEmbedding& embedding) const {
  const auto path = entry_path(embedding.provider_id, embedding.source_text_hash);
  ensure_directory(path.parent_path());
  ByteWriter w;
  for (float v : embedding.vector) w.put_f32(v);
  const auto bytes = std::move(w).take();
  write_binary_file(path, bytes);
}

CachingProvider::CachingProvider(std::shared_ptr<const EmbeddingProvider> inner, EmbeddingCache cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {
  if (!inner_) throw Error(ErrorCode::kInvalidArgument, "caching provider needs an inner provider");
}

TextEmbedding CachingProvider::embed(std::string_view text) const {
  require_text(text);
  const std::string hash = text_hash(text);
  if (auto hit = cache_.lookup(inner_->name(), hash, inner_->dimensionality())) return *std::move(hit);
  TextEmbedding e = inner_->embed(text);
  cache_.store(e);
  return e;
}

TextEmbedding embed_with_fallback(std::string_view text, const EmbeddingProvider& primary,
                                  const EmbeddingProvider& fallback) {
  try {
    return primary.embed(text);
  } catch (const Error& ex) {
    if (ex.code() != ErrorCode::kTimeout && ex.code() != ErrorCode::kUnreachable &&
        ex.code() != ErrorCode::kMalformedResponse) {
      throw;
    }
    logger()->warn("embedding provider {} failed ({}); using {}", primary.name(), ex.what(), fallback.name());
    return fallback.embed(text);
  }
}

double cosine_similarity(const TextEmbedding& a, const TextEmbedding& b) {
  if (a.vector.size() != b.vector.size()) throw Error(ErrorCode::kDimensionMismatch, "embedding widths differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) {
    dot += static_cast<double>(a.vector[i]) * b.vector[i];
    na += static_cast<double>(a.vector[i]) * a.vector[i];
    nb += static_cast<double>(b.vector[i]) * b.vector[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace pressgen
