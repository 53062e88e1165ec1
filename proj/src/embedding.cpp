#include "ssdau/embedding.hpp"

#include <bit>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ssdau/error.hpp"
#include "ssdau/simd/kernels.hpp"
#include "ssdau/util.hpp"

namespace ssdau {

using nlohmann::json;
namespace fs = std::filesystem;

EmbeddingVector mean_pool(std::span<const EmbeddingVector> vectors, std::size_t dim) {
  std::vector<double> acc(dim, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != dim) throw Error(ErrorKind::shape, "vector dimension mismatch in pooling");
    simd::accumulate(acc, v);
  }
  EmbeddingVector out(dim, 0.0f);
  if (vectors.empty()) return out;
  const double inv = 1.0 / static_cast<double>(vectors.size());
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] * inv);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string shape_of(std::string_view surface) {
  std::string shape;
  for (unsigned char c : surface) {
    char cls;
    if (std::isupper(c)) cls = 'X';
    else if (std::islower(c) || c >= 0x80) cls = 'x';
    else if (std::isdigit(c)) cls = 'd';
    else cls = static_cast<char>(c);
    if (shape.empty() || shape.back() != cls) shape.push_back(cls);
  }
  return shape;
}

}  // namespace

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw Error(ErrorKind::config, "embedding dimension must be positive");
}

std::string HashEmbedder::name() const {
  return "hash-v1:d" + std::to_string(dim_) + ":s" + std::to_string(seed_);
}

EmbeddingVector HashEmbedder::unit_vector(const std::string& key) const {
  Rng rng(sha256_u64(std::to_string(seed_) + "\x1f" + key));
  std::vector<double> v(dim_);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  EmbeddingVector out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

EmbeddingVector HashEmbedder::token_vector(std::string_view surface) const {
  const std::string key(surface);
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  const auto shape = unit_vector("shape:" + shape_of(surface));
  const auto ident = unit_vector("tok:" + to_lower(surface));
  std::vector<double> mix(dim_);
  double norm = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    mix[i] = 0.8 * shape[i] + 0.6 * ident[i];
    norm += mix[i] * mix[i];
  }
  norm = std::sqrt(norm);
  EmbeddingVector out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(mix[i] / norm);
  std::lock_guard lock(mu_);
  return memo_.emplace(key, std::move(out)).first->second;
}

SentenceEmbedding HashEmbedder::embed_sentence(std::string_view, std::span<const Token> tokens) const {
  SentenceEmbedding e;
  e.per_token.reserve(tokens.size());
  for (const auto& t : tokens) e.per_token.push_back(token_vector(t.surface));
  e.pooled = mean_pool(e.per_token, dim_);
  return e;
}

// ---------------------------------------------------------------------------

std::string make_embed_request(
    const std::vector<std::pair<std::string_view, std::span<const Token>>>& items) {
  json texts = json::array(), tokens = json::array();
  for (const auto& [text, toks] : items) {
    texts.push_back(std::string(text));
    json offs = json::array();
    for (const auto& t : toks) offs.push_back(json::array({t.char_start, t.char_end}));
    tokens.push_back(std::move(offs));
  }
  return json{{"texts", texts}, {"tokens", tokens}}.dump();
}

std::vector<SentenceEmbedding> parse_embed_response(std::string_view body, std::size_t expected_dim,
                                                    const std::vector<std::size_t>& token_counts) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::provider, std::string("malformed embedding response: ") + e.what());
  }
  if (!j.contains("dim") || !j.contains("vectors") || !j["vectors"].is_array()) {
    throw Error(ErrorKind::provider, "embedding response lacks dim/vectors");
  }
  const auto dim = j["dim"].get<std::size_t>();
  if (dim != expected_dim) {
    throw Error(ErrorKind::provider, "embedding dimension " + std::to_string(dim) +
                                         " does not match configured " +
                                         std::to_string(expected_dim));
  }
  const auto& vectors = j["vectors"];
  if (vectors.size() != token_counts.size()) {
    throw Error(ErrorKind::provider, "embedding response has wrong number of texts");
  }
  auto read_vec = [&](const json& v) {
    if (!v.is_array() || v.size() != dim) throw Error(ErrorKind::provider, "bad vector length");
    EmbeddingVector out(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      out[i] = v[i].get<float>();
      if (!std::isfinite(out[i])) throw Error(ErrorKind::provider, "non-finite embedding value");
    }
    return out;
  };
  std::vector<SentenceEmbedding> out(token_counts.size());
  for (std::size_t t = 0; t < token_counts.size(); ++t) {
    if (vectors[t].size() != token_counts[t]) {
      throw Error(ErrorKind::provider, "token vector count does not match request");
    }
    for (const auto& v : vectors[t]) out[t].per_token.push_back(read_vec(v));
    if (j.contains("pooled") && j["pooled"].is_array() && j["pooled"].size() == token_counts.size()) {
      out[t].pooled = read_vec(j["pooled"][t]);
    } else {
      out[t].pooled = mean_pool(out[t].per_token, dim);
    }
  }
  return out;
}

ServiceEmbedder::ServiceEmbedder(ServiceOptions options)
    : options_(std::move(options)), in_flight_(std::clamp(options_.max_in_flight, 1, 1024)) {
  if (const char* env = std::getenv("SSDAU_EMBED_ENDPOINT"); env != nullptr && *env != '\0') {
    options_.endpoint = env;
  }
  if (options_.endpoint.empty()) throw Error(ErrorKind::config, "service provider needs an endpoint");
  if (options_.dimension == 0) throw Error(ErrorKind::config, "embedding dimension must be positive");
}

std::string ServiceEmbedder::name() const {
  return "service:" + options_.endpoint + options_.path + ":d" + std::to_string(options_.dimension);
}

SentenceEmbedding ServiceEmbedder::embed_sentence(std::string_view text,
                                                  std::span<const Token> tokens) const {
  const std::string body = make_embed_request({{text, tokens}});
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    httplib::Client client(options_.endpoint);
    const auto secs = static_cast<time_t>(options_.timeout_seconds);
    const auto usecs = static_cast<time_t>((options_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    auto res = client.Post(options_.path, body, "application/json");
    if (res && res->status == 200) {
      return std::move(parse_embed_response(res->body, options_.dimension, {tokens.size()}).front());
    }
    if (res && res->status >= 400 && res->status < 500) {
      throw Error(ErrorKind::provider, "embedding service rejected request with status " +
                                           std::to_string(res->status) + ": " + res->body);
    }
    last_error = res ? "status " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < options_.retries) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100 * (attempt + 1)));
    }
  }
  throw Error(ErrorKind::transport, "embedding service " + options_.endpoint + " unreachable after " +
                                        std::to_string(options_.retries) + " retries (" +
                                        last_error + ")");
}

// ---------------------------------------------------------------------------

namespace {

void put_f32(std::ostream& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
  out.write(bytes, 4);
}

float get_f32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace

CachedEmbedder::CachedEmbedder(std::shared_ptr<const EmbeddingProvider> inner, std::string dir,
                               std::size_t dimension)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  fs::create_directories(dir_);
  dim_ = inner_ ? inner_->dimension() : dimension;
  provider_name_ = inner_ ? inner_->name() : std::string();
  load_index();
  if (dim_ == 0) throw Error(ErrorKind::config, "cache dimension unknown; supply a provider");
}

CachedEmbedder::~CachedEmbedder() {
  try {
    flush();
  } catch (...) {
  }
}

std::string CachedEmbedder::name() const { return "cache:" + provider_name_; }

void CachedEmbedder::load_index() {
  const fs::path index_path = fs::path(dir_) / "index.json";
  if (!fs::exists(index_path)) return;
  json j = json::parse(read_file(index_path.string()));
  const auto dim = j.at("dim").get<std::size_t>();
  const auto provider = j.at("provider").get<std::string>();
  if (inner_ && (dim != dim_ || provider != provider_name_)) {
    throw Error(ErrorKind::provider, "cache at " + dir_ + " was built by " + provider + " (d=" +
                                         std::to_string(dim) + "), not " + provider_name_);
  }
  dim_ = dim;
  provider_name_ = provider;
  for (const auto& [key, rec] : j.at("entries").items()) {
    index_[key] = Record{rec.at("offset").get<std::uint64_t>(), rec.at("tokens").get<std::uint64_t>()};
  }
  const fs::path data = fs::path(dir_) / "vectors.bin";
  next_offset_ = fs::exists(data) ? fs::file_size(data) / 4 : 0;
}

std::string CachedEmbedder::key_for(std::string_view text, std::span<const Token> tokens) const {
  std::string material = provider_name_;
  material += '\n';
  material += text;
  material += '\n';
  for (const auto& t : tokens) {
    material += std::to_string(t.char_start) + ":" + std::to_string(t.char_end) + ",";
  }
  return sha256_hex(material);
}

SentenceEmbedding CachedEmbedder::embed_sentence(std::string_view text,
                                                 std::span<const Token> tokens) const {
  const std::string key = key_for(text, tokens);
  const fs::path data = fs::path(dir_) / "vectors.bin";
  {
    std::lock_guard lock(mu_);
    if (auto it = index_.find(key); it != index_.end()) {
      const Record rec = it->second;
      if (rec.tokens != tokens.size()) throw Error(ErrorKind::provider, "cache record token count mismatch");
      std::ifstream in(data, std::ios::binary);
      const std::size_t floats = (rec.tokens + 1) * dim_;
      std::vector<unsigned char> buf(floats * 4);
      in.seekg(static_cast<std::streamoff>(rec.offset * 4));
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
      if (!in) throw Error(ErrorKind::io, "truncated cache file " + data.string());
      SentenceEmbedding e;
      const unsigned char* p = buf.data();
      auto take = [&] {
        EmbeddingVector v(dim_);
        for (auto& x : v) {
          x = get_f32(p);
          p += 4;
        }
        return v;
      };
      for (std::size_t t = 0; t < rec.tokens; ++t) e.per_token.push_back(take());
      e.pooled = take();
      ++hits_;
      return e;
    }
  }
  if (!inner_) throw Error(ErrorKind::provider, "cache miss with no backing provider");
  SentenceEmbedding e = inner_->embed_sentence(text, tokens);
  std::lock_guard lock(mu_);
  if (index_.count(key) != 0) return e;
  std::ofstream out(data, std::ios::binary | std::ios::app);
  for (const auto& v : e.per_token) {
    for (float x : v) put_f32(out, x);
  }
  for (float x : e.pooled) put_f32(out, x);
  if (!out) throw Error(ErrorKind::io, "cannot append to " + data.string());
  index_[key] = Record{next_offset_, tokens.size()};
  next_offset_ += (tokens.size() + 1) * dim_;
  dirty_ = true;
  ++misses_;
  return e;
}

void CachedEmbedder::flush() const {
  std::lock_guard lock(mu_);
  if (!dirty_) return;
  json entries = json::object();
  for (const auto& [key, rec] : index_) entries[key] = {{"offset", rec.offset}, {"tokens", rec.tokens}};
  json j{{"format", 1}, {"dim", dim_}, {"provider", provider_name_}, {"entries", entries}};
  write_file((fs::path(dir_) / "index.json").string(), j.dump(1));
  dirty_ = false;
}

std::size_t CachedEmbedder::entries() const {
  std::lock_guard lock(mu_);
  return index_.size();
}

// ---------------------------------------------------------------------------

std::optional<ProviderKind> parse_provider_kind(std::string_view name) {
  if (name == "service") return ProviderKind::service;
  if (name == "file_cache") return ProviderKind::file_cache;
  if (name == "deterministic_test" || name == "test") return ProviderKind::deterministic_test;
  return std::nullopt;
}

const char* to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::service: return "service";
    case ProviderKind::file_cache: return "file_cache";
    case ProviderKind::deterministic_test: return "deterministic_test";
  }
  return "?";
}

void validate(const ProviderConfig& c) {
  if (c.dimension == 0) throw Error(ErrorKind::config, "provider dimension must be positive");
  const char* env = std::getenv("SSDAU_EMBED_ENDPOINT");
  const bool have_endpoint = !c.endpoint.empty() || (env != nullptr && *env != '\0');
  if (c.kind == ProviderKind::service && !have_endpoint) {
    throw Error(ErrorKind::config, "service provider requires an endpoint");
  }
  if (c.kind == ProviderKind::file_cache && c.cache_dir.empty()) {
    throw Error(ErrorKind::config, "file_cache provider requires a cache directory");
  }
}

std::shared_ptr<EmbeddingProvider> make_provider(const ProviderConfig& c) {
  validate(c);
  auto service = [&] {
    ServiceOptions o;
    o.endpoint = c.endpoint;
    o.dimension = c.dimension;
    o.timeout_seconds = c.timeout_seconds;
    o.retries = c.retries;
    o.max_in_flight = c.max_in_flight;
    return std::make_shared<ServiceEmbedder>(o);
  };
  switch (c.kind) {
    case ProviderKind::deterministic_test:
      return std::make_shared<HashEmbedder>(c.dimension, c.seed);
    case ProviderKind::service:
      return service();
    case ProviderKind::file_cache: {
      std::shared_ptr<const EmbeddingProvider> inner;
      if (c.cache_backend == "service" || (c.cache_backend == "auto" && !c.endpoint.empty())) {
        inner = service();
      } else if (c.cache_backend == "auto" || c.cache_backend == "test") {
        inner = std::make_shared<HashEmbedder>(c.dimension, c.seed);
      } else if (c.cache_backend != "none") {
        throw Error(ErrorKind::config, "unknown cache backend: " + c.cache_backend);
      }
      return std::make_shared<CachedEmbedder>(inner, c.cache_dir, c.dimension);
    }
  }
  throw Error(ErrorKind::config, "unknown provider kind");
}

EmbeddingVector embed_span(const SentenceEmbedding& sentence, const Cut& cut) {
  if (cut.empty()) throw Error(ErrorKind::provider, "cannot embed an empty span");
  if (cut.token_end > sentence.per_token.size()) throw Error(ErrorKind::shape, "span outside sentence");
  const std::size_t dim = sentence.pooled.size();
  return mean_pool(std::span<const EmbeddingVector>(sentence.per_token.data() + cut.token_start,
                                                    cut.token_end - cut.token_start),
                   dim);
}

EmbeddingVector embed_span(const EmbeddingProvider& provider, const Sentence& sentence,
                           const TextBlock& block) {
  if (block.cut.empty()) throw Error(ErrorKind::provider, "cannot embed an empty span");
  return embed_span(provider.embed(sentence), block.cut);
}

const SentenceEmbedding& EmbeddingMemo::get(const Sentence& s) {
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(s.id); it != memo_.end()) return *it->second;
  }
  auto e = std::make_unique<SentenceEmbedding>(provider_.embed(s));
  std::lock_guard lock(mu_);
  auto [it, inserted] = memo_.emplace(s.id, std::move(e));
  return *it->second;
}

}  // namespace ssdau
