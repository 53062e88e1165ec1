#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ssdau/embedding.hpp"
#include "ssdau/error.hpp"

using namespace ssdau;
namespace fs = std::filesystem;

namespace {

double cosine_naive(const EmbeddingVector& a, const EmbeddingVector& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ssdau-emb-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected ssdau::Error");
  return ErrorKind::io;
}

// Minimal stand-in for the embedding service: answers with the hash embedder.
struct FakeService {
  httplib::Server server;
  std::thread worker;
  int port = 0;
  int status = 200;
  std::size_t dim = 8;
  int requests = 0;

  FakeService() {
    server.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      if (status != 200) {
        res.status = status;
        res.set_content("nope", "text/plain");
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      HashEmbedder h(dim);
      nlohmann::json vectors = nlohmann::json::array(), pooled = nlohmann::json::array();
      for (std::size_t t = 0; t < body["texts"].size(); ++t) {
        const std::string text = body["texts"][t];
        std::vector<Token> toks;
        for (const auto& off : body["tokens"][t]) {
          const std::size_t s = off[0], e = off[1];
          toks.push_back(Token{text.substr(s, e - s), s, e});
        }
        const auto emb = h.embed_sentence(text, toks);
        vectors.push_back(emb.per_token);
        pooled.push_back(emb.pooled);
      }
      res.set_content(nlohmann::json{{"dim", dim}, {"vectors", vectors}, {"pooled", pooled}}.dump(),
                      "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    worker = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeService() {
    server.stop();
    worker.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("hash embedder is deterministic and unit length") {
  HashEmbedder a(32), b(32), other_seed(32, 9);
  const Sentence s = make_sentence("s", "Barack Obama visited Paris in 2009 .");
  const auto ea = a.embed(s), eb = b.embed(s);
  REQUIRE(ea.per_token.size() == s.tokens.size());
  for (std::size_t i = 0; i < ea.per_token.size(); ++i) {
    CHECK(ea.per_token[i] == eb.per_token[i]);
    double n = 0;
    for (float x : ea.per_token[i]) n += double(x) * x;
    CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(other_seed.embed(s).per_token[0] != ea.per_token[0]);
  CHECK(a.name() != other_seed.name());
}

TEST_CASE("pooled vector is the token mean") {
  HashEmbedder h(16);
  const Sentence s = make_sentence("s", "the quick brown fox");
  const auto e = h.embed(s);
  for (std::size_t d = 0; d < 16; ++d) {
    double m = 0;
    for (const auto& v : e.per_token) m += v[d];
    CHECK(e.pooled[d] == doctest::Approx(m / 4).epsilon(1e-6));
  }
  CHECK(cosine_naive(e.pooled, e.pooled) == doctest::Approx(1.0));
  CHECK(mean_pool({}, 3) == EmbeddingVector(3, 0.0f));
}

TEST_CASE("same shape tokens sit closer than unrelated ones") {
  HashEmbedder h(64);
  const double same_shape = cosine_naive(h.token_vector("Paris"), h.token_vector("London"));
  const double diff_shape = cosine_naive(h.token_vector("Paris"), h.token_vector("2009"));
  CHECK(same_shape > diff_shape);
  CHECK(same_shape == doctest::Approx(0.64).epsilon(0.5));
  CHECK(h.token_vector("Paris") == h.token_vector("Paris"));
}

TEST_CASE("span embedding averages the covered tokens") {
  HashEmbedder h(8);
  const Sentence s = make_sentence("s", "a New York b");
  const auto e = h.embed(s);
  CHECK(embed_span(e, Cut{1, 2}) == e.per_token[1]);
  const auto two = embed_span(e, Cut{1, 3});
  for (std::size_t d = 0; d < 8; ++d) {
    CHECK(two[d] == doctest::Approx((double(e.per_token[1][d]) + e.per_token[2][d]) / 2).epsilon(1e-6));
  }
  CHECK(kind_of([&] { embed_span(e, Cut{2, 2}); }) == ErrorKind::provider);
  CHECK(kind_of([&] { embed_span(e, Cut{3, 9}); }) == ErrorKind::shape);
  // context-free: the same surface gives the same vector anywhere
  const Sentence t = make_sentence("t", "York is old");
  CHECK(h.embed(t).per_token[0] == e.per_token[2]);
}

TEST_CASE("file cache is transparent and persists") {
  const auto dir = scratch_dir("cache");
  auto inner = std::make_shared<HashEmbedder>(12);
  const Sentence s1 = make_sentence("a", "Alice met Bob .");
  const Sentence s2 = make_sentence("b", "Carol stayed home");
  {
    CachedEmbedder c(inner, dir.string());
    const auto e1 = c.embed(s1);
    CHECK(c.misses() == 1);
    const auto again = c.embed(s1);
    CHECK(c.hits() == 1);
    CHECK(again.per_token == e1.per_token);
    CHECK(again.pooled == e1.pooled);
    CHECK(e1.per_token == inner->embed(s1).per_token);
    c.embed(s2);
    CHECK(c.entries() == 2);
  }
  CachedEmbedder reopened(nullptr, dir.string());
  CHECK(reopened.dimension() == 12);
  const auto e2 = reopened.embed(s2);
  CHECK(e2.per_token == inner->embed(s2).per_token);
  CHECK(e2.pooled == inner->embed(s2).pooled);
  CHECK(reopened.hits() == 1);
  const Sentence unseen = make_sentence("c", "never seen");
  CHECK(kind_of([&] { reopened.embed(unseen); }) == ErrorKind::provider);
  // a different provider may not reuse the cache
  CHECK(kind_of([&] { CachedEmbedder(std::make_shared<HashEmbedder>(16), dir.string()); }) ==
        ErrorKind::provider);
  fs::remove_all(dir);
}

TEST_CASE("service client round trips through a fake server") {
  FakeService fake;
  ServiceOptions o;
  o.endpoint = fake.endpoint();
  o.dimension = 8;
  o.retries = 0;
  ServiceEmbedder client(o);
  const Sentence s = make_sentence("s", "Ann lives in Oslo");
  const auto got = client.embed(s);
  const auto want = HashEmbedder(8).embed(s);
  REQUIRE(got.per_token.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(got.per_token[i] == want.per_token[i]);
  CHECK(got.pooled == want.pooled);

  fake.status = 422;
  CHECK(kind_of([&] { client.embed(s); }) == ErrorKind::provider);

  ServiceOptions wrong = o;
  wrong.dimension = 4;
  fake.status = 200;
  CHECK(kind_of([&] { ServiceEmbedder(wrong).embed(s); }) == ErrorKind::provider);
}

TEST_CASE("service client retries then reports transport failure") {
  ServiceOptions o;
  o.endpoint = "http://127.0.0.1:1";
  o.dimension = 4;
  o.retries = 1;
  o.timeout_seconds = 0.5;
  ServiceEmbedder client(o);
  const Sentence s = make_sentence("s", "x");
  try {
    client.embed(s);
    FAIL("expected transport error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::transport);
    CHECK(std::string(e.what()).find("1 retries") != std::string::npos);
  }
}

TEST_CASE("server errors are retried") {
  FakeService fake;
  fake.status = 503;
  ServiceOptions o;
  o.endpoint = fake.endpoint();
  o.dimension = 8;
  o.retries = 2;
  CHECK(kind_of([&] { ServiceEmbedder(o).embed(make_sentence("s", "a")); }) == ErrorKind::transport);
  CHECK(fake.requests == 3);
}

TEST_CASE("endpoint environment variable overrides configuration") {
  FakeService fake;
  ::setenv("SSDAU_EMBED_ENDPOINT", fake.endpoint().c_str(), 1);
  ServiceOptions o;
  o.endpoint = "http://127.0.0.1:1";
  o.dimension = 8;
  o.retries = 0;
  ServiceEmbedder client(o);
  CHECK(client.options().endpoint == fake.endpoint());
  CHECK(client.embed(make_sentence("s", "hello world")).per_token.size() == 2);
  ProviderConfig c;
  c.kind = ProviderKind::service;
  CHECK_NOTHROW(validate(c));
  ::unsetenv("SSDAU_EMBED_ENDPOINT");
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::config);
}

TEST_CASE("response parsing rejects malformed bodies") {
  CHECK(kind_of([] { parse_embed_response("{", 2, {1}); }) == ErrorKind::provider);
  CHECK(kind_of([] { parse_embed_response(R"({"dim":3,"vectors":[[[1,2,3]]]})", 2, {1}); }) ==
        ErrorKind::provider);
  CHECK(kind_of([] { parse_embed_response(R"({"dim":2,"vectors":[[[1,2]]]})", 2, {2}); }) ==
        ErrorKind::provider);
  CHECK(kind_of([] { parse_embed_response(R"({"dim":2,"vectors":[[[1]]]})", 2, {1}); }) ==
        ErrorKind::provider);
  const auto ok = parse_embed_response(R"({"dim":2,"vectors":[[[1,2],[3,4]]]})", 2, {2});
  CHECK(ok[0].pooled == EmbeddingVector{2.0f, 3.0f});
  const auto req = nlohmann::json::parse(make_embed_request(
      {{"ab cd", std::span<const Token>(make_sentence("s", "ab cd").tokens)}}));
  CHECK(req["tokens"][0][1] == nlohmann::json::array({3, 5}));
}

TEST_CASE("provider factory validates its configuration") {
  ProviderConfig c;
  CHECK(make_provider(c)->name().rfind("hash-v1", 0) == 0);
  c.dimension = 0;
  CHECK(kind_of([&] { make_provider(c); }) == ErrorKind::config);
  c.dimension = 4;
  c.kind = ProviderKind::file_cache;
  CHECK(kind_of([&] { make_provider(c); }) == ErrorKind::config);
  c.cache_dir = scratch_dir("factory").string();
  c.cache_backend = "bogus";
  CHECK(kind_of([&] { make_provider(c); }) == ErrorKind::config);
  c.cache_backend = "test";
  CHECK(make_provider(c)->name().rfind("cache:hash-v1", 0) == 0);
  fs::remove_all(c.cache_dir);
  CHECK(parse_provider_kind("service") == ProviderKind::service);
  CHECK_FALSE(parse_provider_kind("gpu").has_value());
}
