#pragma once
// Fixed-dimension embeddings for triplet texts and sub-problem queries.
// The default backend is a deterministic character-trigram hasher; a remote
// HTTP service can be plugged in when a neural retriever is available.

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "memqa/core.hpp"

namespace memqa {

using EmbeddingVector = Eigen::VectorXd;

// Remote embed call failed after exhausting retries; callers may retry.
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EmbedderBackend { local_trigram, remote_service };

struct EmbedderConfig {
  EmbedderBackend backend = EmbedderBackend::local_trigram;
  int dimension = 512;  // must be >= 8
  // remote_service settings
  std::string remote_url;          // e.g. http://host:port/embed
  int timeout_ms = 10000;
  int max_retries = 2;
  std::string auth_token_env;      // env var holding a bearer token, optional
  int max_in_flight = 4;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(const std::string& text) const = 0;
  virtual int dimension() const = 0;
  // Identifies the backend + settings; persisted indices refuse to load
  // under a different fingerprint.
  virtual std::string fingerprint() const = 0;
};

// Deterministic lexical embedder: each character trigram of the lowercased
// text (ASCII fold; code points are the units) is hashed with 64-bit FNV-1a
// over its UTF-8 bytes into one of `dimension` buckets, counts accumulated,
// then L2-normalized. Texts shorter than three characters have no trigrams
// and embed to the zero vector.
class TrigramEmbedder final : public Embedder {
 public:
  explicit TrigramEmbedder(int dimension = 512);

  EmbeddingVector embed(const std::string& text) const override;
  int dimension() const override { return dimension_; }
  std::string fingerprint() const override;

 private:
  int dimension_;
};

// POSTs {"texts": [...]} to the configured endpoint and returns the
// service's vectors unmodified. Bounded in-flight requests.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderConfig config);
  ~RemoteEmbedder() override;

  EmbeddingVector embed(const std::string& text) const override;
  int dimension() const override { return config_.dimension; }
  std::string fingerprint() const override;

 private:
  EmbedderConfig config_;
  struct Limiter;
  std::unique_ptr<Limiter> limiter_;
};

// Optional in-memory memo keyed by exact text.
class CachingEmbedder final : public Embedder {
 public:
  explicit CachingEmbedder(std::shared_ptr<const Embedder> inner);

  EmbeddingVector embed(const std::string& text) const override;
  int dimension() const override { return inner_->dimension(); }
  std::string fingerprint() const override { return inner_->fingerprint(); }

 private:
  std::shared_ptr<const Embedder> inner_;
  struct Cache;
  std::shared_ptr<Cache> cache_;
};

std::shared_ptr<const Embedder> make_embedder(const EmbedderConfig& config);

// Dot product; equals cosine similarity for unit-norm vectors.
double similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace memqa
