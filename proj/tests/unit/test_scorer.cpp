#include <doctest.h>

#include <cmath>
#include <random>

#include "ssdau/error.hpp"
#include "ssdau/scorer.hpp"

using namespace ssdau;

namespace {

// Plain loops, independent of the SIMD kernels.
std::vector<double> oracle_scores(const PairScorer& s, const EmbeddingVector& h, const EmbeddingVector& t) {
  std::vector<double> x(h.begin(), h.end());
  x.insert(x.end(), t.begin(), t.end());
  std::vector<double> e(s.hidden_dim);
  for (std::size_t a = 0; a < s.hidden_dim; ++a) {
    double z = s.bias[a];
    for (std::size_t c = 0; c < x.size(); ++c) z += s.w[a * x.size() + c] * x[c];
    e[a] = std::max(z, 0.0);
  }
  std::vector<double> v(s.relations, 0.0);
  for (std::size_t r = 0; r < s.relations; ++r) {
    for (std::size_t a = 0; a < s.hidden_dim; ++a) v[r] += s.r_rel[a * s.relations + r] * e[a];
  }
  return v;
}

EmbeddingVector random_vec(std::mt19937_64& rng, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  EmbeddingVector v(d);
  for (auto& x : v) x = static_cast<float>(g(rng));
  return v;
}

// Class-dependent means plus noise.
std::vector<PairExample> clustered(std::mt19937_64& rng, std::size_t d, std::size_t k, std::size_t per_class,
                                   double noise) {
  std::vector<EmbeddingVector> hc, tc;
  for (std::size_t r = 0; r < k; ++r) {
    hc.push_back(random_vec(rng, d));
    tc.push_back(random_vec(rng, d));
  }
  std::normal_distribution<double> g(0.0, noise);
  std::vector<PairExample> out;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t r = 0; r < k; ++r) {
      PairExample ex{hc[r], tc[r], r};
      for (auto& x : ex.head) x += static_cast<float>(g(rng));
      for (auto& x : ex.tail) x += static_cast<float>(g(rng));
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("zero scorer gives flat scores") {
  const auto s = PairScorer::zeros(4, 3, 5);
  const EmbeddingVector h{1, 2, 3, 4}, t{-1, 0, 1, 2};
  CHECK(score_pair(s, h, t) == std::vector<double>(5, 0.0));
  for (double p : softmax(score_pair(s, h, t))) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
  auto neg = PairScorer::random(4, 3, 2, 1);
  std::fill(neg.w.begin(), neg.w.end(), 0.0);
  std::fill(neg.bias.begin(), neg.bias.end(), -1.0);
  const auto f = forward_pair(neg, h, t, false, 0);
  CHECK(f.hidden == std::vector<double>(3, 0.0));
  CHECK(f.scores == std::vector<double>(2, 0.0));
  CHECK(f.mask.empty());
}

TEST_CASE("forward pass agrees with a scalar loop") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto s = PairScorer::random(4, 3, 2, 1000 + i);
    const auto h = random_vec(rng, 4), t = random_vec(rng, 4);
    const auto got = score_pair(s, h, t);
    const auto want = oracle_scores(s, h, t);
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(std::abs(got[r] - want[r]) <= 1e-9 * std::max(1.0, std::abs(want[r])));
    }
  }
}

TEST_CASE("log-sum-exp and softmax are stable") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  const auto p = softmax(big);
  CHECK(p[0] == doctest::Approx(0.5));
  const std::vector<double> ninf{-INFINITY, -INFINITY};
  CHECK(log_sum_exp(ninf) == -INFINITY);
}

TEST_CASE("inverted dropout is unbiased") {
  std::mt19937_64 rng(11);
  auto s = PairScorer::random(6, 8, 3, 4);
  s.dropout_rate = 0.3;
  std::fill(s.bias.begin(), s.bias.end(), 0.5);
  const auto h = random_vec(rng, 6), t = random_vec(rng, 6);
  const auto eval = score_pair(s, h, t);
  const int n = 10000;
  std::vector<double> sum(3, 0.0), sq(3, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto v = score_pair(s, h, t, true, static_cast<std::uint64_t>(i));
    for (int r = 0; r < 3; ++r) {
      sum[r] += v[r];
      sq[r] += v[r] * v[r];
    }
  }
  for (int r = 0; r < 3; ++r) {
    const double mean = sum[r] / n;
    const double var = sq[r] / n - mean * mean;
    const double se = std::sqrt(var / n);
    CHECK(std::abs(mean - eval[r]) <= 3 * se + 1e-12);
  }
  const auto f = forward_pair(s, h, t, true, 99);
  for (double m : f.mask) CHECK((m == 0.0 || m == doctest::Approx(1.0 / 0.7)));
  CHECK(score_pair(s, h, t, true, 99) == score_pair(s, h, t, true, 99));
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(3);
  auto s = PairScorer::random(3, 2, 2, 17);
  std::vector<PairExample> data;
  for (int i = 0; i < 6; ++i) data.push_back(PairExample{random_vec(rng, 3), random_vec(rng, 3), std::size_t(i % 2)});
  for (bool dropout : {false, true}) {
    s.dropout_rate = dropout ? 0.4 : 0.0;
    const auto g = loss_gradient(s, data, dropout, 77);
    // loss under the same masks as the gradient
    auto loss = [&](const PairScorer& p) {
      double total = 0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto v = score_pair(p, data[i].head, data[i].tail, dropout, 77 + i);
        total += log_sum_exp(v) - v[data[i].relation];
      }
      return total / double(data.size());
    };
    double worst = 0;
    auto probe = [&](std::vector<double> PairScorer::*field, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < grad.size(); ++i) {
        PairScorer plus = s, minus = s;
        const double eps = 1e-6;
        (plus.*field)[i] += eps;
        (minus.*field)[i] -= eps;
        const double fd = (loss(plus) - loss(minus)) / (2 * eps);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        worst = std::max(worst, std::abs(fd - grad[i]) / denom);
      }
    };
    probe(&PairScorer::w, g.w);
    probe(&PairScorer::bias, g.bias);
    probe(&PairScorer::r_rel, g.r_rel);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("training separates a separable set") {
  std::mt19937_64 rng(21);
  const auto data = clustered(rng, 4, 2, 10, 0.05);
  REQUIRE(data.size() == 20);
  const auto init = PairScorer::random(4, 8, 2, 5);
  TrainReport report;
  TrainOptions o;
  o.epochs = 200;
  o.learning_rate = 0.5;
  o.use_dropout = false;
  const auto trained = train_scorer(init, data, o, &report);
  CHECK(accuracy(trained, data) == 1.0);
  for (const auto& ex : data) {
    const auto v = score_pair(trained, ex.head, ex.tail);
    CHECK(v[ex.relation] - v[1 - ex.relation] > 0.5);
  }
  REQUIRE(report.epoch_loss.size() == 200);
  for (std::size_t i = 1; i < report.epoch_loss.size(); ++i) {
    CHECK(report.epoch_loss[i] <= report.epoch_loss[i - 1] + 1e-9);
  }
  o.learning_rate = 0.0;
  const auto frozen = train_scorer(init, data, o);
  CHECK(frozen.w == init.w);
  CHECK(frozen.bias == init.bias);
  CHECK(frozen.r_rel == init.r_rel);
  o.learning_rate = -1.0;
  CHECK_THROWS_AS(train_scorer(init, data, o), Error);
  o.learning_rate = 1e300;
  o.epochs = 3;
  CHECK_THROWS_AS(train_scorer(init, data, o), Error);
}

TEST_CASE("pretrained initialization beats random and zero") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const auto data = clustered(rng, 8, 3, 10, 0.3);
    InitOptions o;
    o.hidden_dim = 16;
    o.relations = 3;
    o.seed = seed;
    const auto pre = init_pretrained(data, o);
    CHECK(pre.warnings.empty());
    CHECK(pre.scorer.init == InitKind::pretrained);
    const double lp = mean_loss(pre.scorer, data);
    const double lr = mean_loss(PairScorer::random(8, 16, 3, seed), data);
    const double lz = mean_loss(PairScorer::zeros(8, 16, 3), data);
    if (lp < lr && lp < lz) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("pretrained initialization is seeded and handles constant inputs") {
  std::mt19937_64 rng(8);
  const auto data = clustered(rng, 4, 2, 5, 0.2);
  InitOptions o;
  o.hidden_dim = 6;
  o.relations = 2;
  o.seed = 3;
  const auto a = init_pretrained(data, o), b = init_pretrained(data, o);
  CHECK(a.scorer.w == b.scorer.w);
  CHECK(a.scorer.r_rel == b.scorer.r_rel);
  std::vector<PairExample> flat(4, PairExample{EmbeddingVector(4, 1.0f), EmbeddingVector(4, 2.0f), 0});
  flat[1].relation = 1;
  const auto fb = init_pretrained(flat, o);
  REQUIRE(fb.warnings.size() == 1);
  CHECK(fb.scorer.init == InitKind::random);
  CHECK_THROWS_AS(init_pretrained({}, o), Error);
  o.ridge = 0.0;
  CHECK_THROWS_AS(init_pretrained(data, o), Error);
}

TEST_CASE("scorer blob round trips and rejects damage") {
  auto s = PairScorer::random(3, 4, 2, 9);
  s.dropout_rate = 0.25;
  s.seed = 12;
  const auto blob = serialize_scorer(s, {"born_in", "lives_in"});
  CHECK(blob.rfind("SSDAUPS1", 0) == 0);
  std::vector<std::string> names;
  const auto back = deserialize_scorer(blob, &names);
  CHECK(back.w == s.w);
  CHECK(back.bias == s.bias);
  CHECK(back.r_rel == s.r_rel);
  CHECK(back.dropout_rate == 0.25);
  CHECK(back.init == InitKind::loaded);
  CHECK(names == std::vector<std::string>{"born_in", "lives_in"});
  CHECK_THROWS_AS(deserialize_scorer(blob.substr(0, blob.size() - 8)), Error);
  CHECK_THROWS_AS(deserialize_scorer("XXXXXXXX" + blob.substr(8)), Error);

  auto broken = s;
  broken.bias.pop_back();
  CHECK_THROWS_AS(broken.check_shapes(), Error);
  const EmbeddingVector wrong(2, 0.0f), right(3, 0.0f);
  CHECK_THROWS_AS(score_pair(s, wrong, right), Error);
}
