#include "memqa/embedding.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <mutex>
#include <semaphore>
#include <unordered_map>

namespace memqa {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

// Length in bytes of the UTF-8 sequence starting at `lead`; malformed lead
// or truncated sequences count as a single byte so hashing stays total.
std::size_t utf8_span(std::string_view text, std::size_t pos) {
  const unsigned char lead = static_cast<unsigned char>(text[pos]);
  std::size_t len = 1;
  if ((lead & 0xe0) == 0xc0) len = 2;
  else if ((lead & 0xf0) == 0xe0) len = 3;
  else if ((lead & 0xf8) == 0xf0) len = 4;
  if (pos + len > text.size()) return 1;
  for (std::size_t i = 1; i < len; ++i) {
    if ((static_cast<unsigned char>(text[pos + i]) & 0xc0) != 0x80) return 1;
  }
  return len;
}

}  // namespace

double similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) {
    throw ValidationError("similarity: dimension mismatch (" +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  return a.dot(b);
}

TrigramEmbedder::TrigramEmbedder(int dimension) : dimension_(dimension) {
  if (dimension_ < 8) {
    throw ValidationError("embedder dimension must be >= 8");
  }
}

EmbeddingVector TrigramEmbedder::embed(const std::string& text) const {
  if (text.empty()) {
    throw ValidationError("cannot embed empty text");
  }
  std::string lowered = text;
  for (char& c : lowered) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  // Character boundaries (UTF-8 sequences) over the lowered text.
  std::vector<std::size_t> starts;
  for (std::size_t pos = 0; pos < lowered.size();) {
    starts.push_back(pos);
    pos += utf8_span(lowered, pos);
  }
  starts.push_back(lowered.size());

  EmbeddingVector v = EmbeddingVector::Zero(dimension_);
  const std::size_t chars = starts.size() - 1;
  if (chars >= 3) {
    for (std::size_t i = 0; i + 3 <= chars; ++i) {
      std::string_view trigram(lowered.data() + starts[i],
                               starts[i + 3] - starts[i]);
      v[static_cast<Eigen::Index>(fnv1a(trigram) %
                                  static_cast<std::uint64_t>(dimension_))] +=
          1.0;
    }
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

std::string TrigramEmbedder::fingerprint() const {
  return "local_trigram/fnv1a64/d" + std::to_string(dimension_);
}

// --- remote backend -------------------------------------------------------

struct RemoteEmbedder::Limiter {
  explicit Limiter(int slots) : sem(slots) {}
  std::counting_semaphore<> sem;
};

RemoteEmbedder::RemoteEmbedder(EmbedderConfig config)
    : config_(std::move(config)),
      limiter_(std::make_unique<Limiter>(std::max(config_.max_in_flight, 1))) {
  if (config_.dimension < 8) {
    throw ValidationError("embedder dimension must be >= 8");
  }
  if (config_.remote_url.empty()) {
    throw ValidationError("remote embedder requires a URL");
  }
}

RemoteEmbedder::~RemoteEmbedder() = default;

namespace {

// Splits "http://host:port/path" into client base and request path.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const std::size_t host_start =
      scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

EmbeddingVector RemoteEmbedder::embed(const std::string& text) const {
  if (text.empty()) {
    throw ValidationError("cannot embed empty text");
  }
  limiter_->sem.acquire();
  struct Release {
    std::counting_semaphore<>& sem;
    ~Release() { sem.release(); }
  } release{limiter_->sem};

  const auto [base, path] = split_url(config_.remote_url);
  httplib::Client client(base);
  client.set_connection_timeout(0, config_.timeout_ms * 1000);
  client.set_read_timeout(config_.timeout_ms / 1000,
                          (config_.timeout_ms % 1000) * 1000);
  httplib::Headers headers;
  if (!config_.auth_token_env.empty()) {
    if (const char* token = std::getenv(config_.auth_token_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  const std::string body = nlohmann::json{{"texts", {text}}}.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    try {
      auto parsed = nlohmann::json::parse(res->body);
      const auto& vectors = parsed.at("vectors");
      if (!vectors.is_array() || vectors.empty()) {
        throw TransportError("embedding response has no vectors");
      }
      const auto& values = vectors.at(0);
      if (static_cast<int>(values.size()) != config_.dimension) {
        throw TransportError(
            "embedding service returned dimension " +
            std::to_string(values.size()) + ", expected " +
            std::to_string(config_.dimension));
      }
      EmbeddingVector v(config_.dimension);
      for (int i = 0; i < config_.dimension; ++i) {
        v[i] = values.at(i).get<double>();
      }
      return v;
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed embedding response: ") +
                           e.what());
    }
  }
  throw TransportError("embed request failed after " +
                       std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_error);
}

std::string RemoteEmbedder::fingerprint() const {
  return "remote/" + config_.remote_url + "/d" +
         std::to_string(config_.dimension);
}

// --- memo wrapper ----------------------------------------------------------

struct CachingEmbedder::Cache {
  std::mutex mutex;
  std::unordered_map<std::string, EmbeddingVector> entries;
};

CachingEmbedder::CachingEmbedder(std::shared_ptr<const Embedder> inner)
    : inner_(std::move(inner)), cache_(std::make_shared<Cache>()) {}

EmbeddingVector CachingEmbedder::embed(const std::string& text) const {
  {
    std::lock_guard lock(cache_->mutex);
    auto it = cache_->entries.find(text);
    if (it != cache_->entries.end()) return it->second;
  }
  EmbeddingVector v = inner_->embed(text);
  std::lock_guard lock(cache_->mutex);
  cache_->entries.emplace(text, v);
  return v;
}

std::shared_ptr<const Embedder> make_embedder(const EmbedderConfig& config) {
  switch (config.backend) {
    case EmbedderBackend::local_trigram:
      return std::make_shared<TrigramEmbedder>(config.dimension);
    case EmbedderBackend::remote_service:
      return std::make_shared<RemoteEmbedder>(config);
  }
  throw ValidationError("unknown embedder backend");
}

}  // namespace memqa
