#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ssdau/corpus.hpp"
#include "ssdau/discretize.hpp"

namespace ssdau {

using EmbeddingVector = std::vector<float>;

struct SentenceEmbedding {
  std::vector<EmbeddingVector> per_token;
  EmbeddingVector pooled;
};

// Elementwise mean, accumulated in double. Empty input gives a zero vector.
EmbeddingVector mean_pool(std::span<const EmbeddingVector> vectors, std::size_t dim);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dimension() const = 0;
  // Stable identity used in cache keys and manifests.
  virtual std::string name() const = 0;
  virtual SentenceEmbedding embed_sentence(std::string_view text,
                                           std::span<const Token> tokens) const = 0;

  SentenceEmbedding embed(const Sentence& s) const { return embed_sentence(s.text, s.tokens); }
};

// Context-free test embedder. A token's vector is a pure function of its
// surface: normalize(0.8 * u(shape) + 0.6 * u(lowercased surface)), where
// u(key) is a unit vector drawn from a Gaussian stream seeded by
// SHA-256(key) and `shape` is the collapsed character-class pattern
// ("Xx", "d-d", ...). Tokens of the same shape therefore sit closer together
// than unrelated tokens. Pooled = mean of token vectors.
class HashEmbedder final : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::size_t dim = 64, std::uint64_t seed = 0);

  std::size_t dimension() const override { return dim_; }
  std::string name() const override;
  SentenceEmbedding embed_sentence(std::string_view text, std::span<const Token> tokens) const override;

  EmbeddingVector token_vector(std::string_view surface) const;

 private:
  EmbeddingVector unit_vector(const std::string& key) const;

  std::size_t dim_;
  std::uint64_t seed_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, EmbeddingVector> memo_;
};

struct ServiceOptions {
  std::string endpoint = "http://127.0.0.1:8600";
  std::string path = "/embed";
  std::size_t dimension = 768;
  double timeout_seconds = 30.0;
  int retries = 2;
  int max_in_flight = 4;
};

// HTTP client for the embedding service. POST {texts, tokens} and expect
// {dim, vectors, pooled}. The SSDAU_EMBED_ENDPOINT environment variable
// overrides the configured endpoint.
class ServiceEmbedder final : public EmbeddingProvider {
 public:
  explicit ServiceEmbedder(ServiceOptions options);

  std::size_t dimension() const override { return options_.dimension; }
  std::string name() const override;
  SentenceEmbedding embed_sentence(std::string_view text, std::span<const Token> tokens) const override;

  const ServiceOptions& options() const { return options_; }

 private:
  ServiceOptions options_;
  mutable std::counting_semaphore<1024> in_flight_;
};

// Parses the service response body; exposed for tests.
std::vector<SentenceEmbedding> parse_embed_response(std::string_view body, std::size_t expected_dim,
                                                    const std::vector<std::size_t>& token_counts);
std::string make_embed_request(const std::vector<std::pair<std::string_view, std::span<const Token>>>& items);

// Content-addressed on-disk cache in front of another provider.
// Layout: <dir>/vectors.bin holds little-endian float32 records (per-token
// vectors then the pooled vector); <dir>/index.json maps SHA-256 content
// keys to record offsets. With no inner provider, misses are errors.
class CachedEmbedder final : public EmbeddingProvider {
 public:
  CachedEmbedder(std::shared_ptr<const EmbeddingProvider> inner, std::string dir,
                 std::size_t dimension = 0);
  ~CachedEmbedder() override;

  std::size_t dimension() const override { return dim_; }
  std::string name() const override;
  SentenceEmbedding embed_sentence(std::string_view text, std::span<const Token> tokens) const override;

  void flush() const;
  std::size_t entries() const;
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  struct Record {
    std::uint64_t offset = 0;  // in floats
    std::uint64_t tokens = 0;
  };

  std::string key_for(std::string_view text, std::span<const Token> tokens) const;
  void load_index();

  std::shared_ptr<const EmbeddingProvider> inner_;
  std::string dir_;
  std::size_t dim_ = 0;
  std::string provider_name_;
  mutable std::mutex mu_;
  mutable std::map<std::string, Record> index_;
  mutable std::uint64_t next_offset_ = 0;
  mutable bool dirty_ = false;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

enum class ProviderKind { service, file_cache, deterministic_test };

std::optional<ProviderKind> parse_provider_kind(std::string_view name);
const char* to_string(ProviderKind kind);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::deterministic_test;
  std::size_t dimension = 64;
  std::string endpoint;    // service
  std::string cache_dir;   // file_cache
  // Provider behind the file cache: service when an endpoint is set,
  // otherwise the test embedder; "none" makes the cache read-only.
  std::string cache_backend = "auto";
  double timeout_seconds = 30.0;
  int retries = 2;
  int max_in_flight = 4;
  std::uint64_t seed = 0;
};

void validate(const ProviderConfig& config);
std::shared_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

// Mean of per-token vectors over the block's cut, taken from the embedding
// of the whole sentence. Throws for empty spans.
EmbeddingVector embed_span(const SentenceEmbedding& sentence, const Cut& cut);
EmbeddingVector embed_span(const EmbeddingProvider& provider, const Sentence& sentence,
                           const TextBlock& block);

// Memoizes sentence embeddings by sentence id for a single pass.
class EmbeddingMemo {
 public:
  explicit EmbeddingMemo(const EmbeddingProvider& provider) : provider_(provider) {}

  const SentenceEmbedding& get(const Sentence& s);
  const EmbeddingProvider& provider() const { return provider_; }

 private:
  const EmbeddingProvider& provider_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<SentenceEmbedding>> memo_;
};

}  // namespace ssdau
