#include <doctest.h>

#include "fixtures.hpp"
#include "ssdau/error.hpp"
#include "ssdau/topics.hpp"

using namespace ssdau;
using ssdau::testing::planted_clusters;

TEST_CASE("a single topic keeps every candidate") {
  HashEmbedder h(32);
  const auto s = planted_clusters();
  TopicOptions o;
  o.k_topics = 1;
  const auto m = fit_topics(s, h, o);
  for (const auto& a : s) {
    for (const auto& b : s) CHECK(topic_filter(m, h, a, b, 1.0));
  }
}

TEST_CASE("planted clusters: cross-cluster candidates are rejected") {
  HashEmbedder h(32);
  const auto s = planted_clusters();
  TopicOptions o;
  o.k_topics = 2;
  o.seed = 5;
  const auto m = fit_topics(s, h, o);
  REQUIRE(m.centroids.size() == 2);
  CHECK(m.assignments.size() == s.size());
  const std::size_t word_topic = m.assignments.at("w0"), number_topic = m.assignments.at("n0");
  CHECK(word_topic != number_topic);
  for (const auto& x : s) CHECK(m.assignments.at(x.id) == (x.id[0] == 'w' ? word_topic : number_topic));

  const Sentence words_src = s[0], numbers_src = s[6];
  const Sentence word_cand = make_sentence("c1", "farmers sail boats"), num_cand = make_sentence("c2", "2 4 6 8");
  CHECK(topic_filter(m, h, words_src, words_src, 0.9));
  CHECK(topic_filter(m, h, words_src, word_cand, 0.9));
  CHECK(topic_filter(m, h, numbers_src, num_cand, 0.9));
  CHECK_FALSE(topic_filter(m, h, words_src, num_cand, 0.9));
  CHECK_FALSE(topic_filter(m, h, numbers_src, word_cand, 0.9));
  // an affinity floor of 0 admits anything
  CHECK(topic_filter(m, h, words_src, num_cand, 0.0));
  CHECK_THROWS_AS(topic_filter(m, h, words_src, num_cand, 1.5), Error);

  // sources outside the fitted set fall back to their nearest centroid
  CHECK(topic_filter(m, h, make_sentence("new", "grain boats"), word_cand, 0.9));
}

TEST_CASE("fitting is seeded and term scores are nonnegative") {
  HashEmbedder h(32);
  const auto s = planted_clusters();
  TopicOptions o;
  o.k_topics = 3;
  o.seed = 11;
  const auto a = fit_topics(s, h, o), b = fit_topics(s, h, o);
  CHECK(a.centroids == b.centroids);
  CHECK(a.assignments == b.assignments);
  CHECK(a.topic_terms == b.topic_terms);
  bool any_terms = false;
  for (const auto& terms : a.topic_terms) {
    CHECK(terms.size() <= o.top_terms);
    for (std::size_t i = 0; i < terms.size(); ++i) {
      CHECK(terms[i].second >= 0.0);
      if (i > 0) CHECK(terms[i - 1].second >= terms[i].second);
      any_terms = true;
    }
  }
  CHECK(any_terms);
  for (const auto& x : s) {
    const auto t = a.assignments.at(x.id);
    CHECK(t < 3);
    CHECK(nearest_topic(a, normalized_pooled(h, x)) == t);
  }
}

TEST_CASE("too few sentences or a zero topic count is an error") {
  HashEmbedder h(8);
  const auto s = planted_clusters();
  TopicOptions o;
  o.k_topics = s.size() + 1;
  try {
    fit_topics(s, h, o);
    FAIL("expected model error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::model);
  }
  o.k_topics = 0;
  CHECK_THROWS_AS(fit_topics(s, h, o), Error);
}
