#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "fixtures.hpp"
#include "ssdau/augment.hpp"
#include "ssdau/error.hpp"
#include "ssdau/serialize.hpp"

using namespace ssdau;
using ssdau::testing::fixture_corpus;
using ssdau::testing::mention;
using ssdau::testing::shared_entity_instance;

namespace {

ReplacementStep step(Role role, std::size_t triple, std::string surface, std::string relation = "") {
  return ReplacementStep{role, triple, std::move(surface), std::move(relation), 0.9,
                         BlockRef{"donor", 0, role}};
}

void check_aligned(const Sentence& s, const std::vector<Triple>& triples) {
  CHECK(make_sentence(s.id, s.text).tokens == s.tokens);
  for (const auto& t : triples) {
    CHECK(span_text(s, t.head.token_start, t.head.token_end) == t.head.surface);
    CHECK(span_text(s, t.tail.token_start, t.tail.token_end) == t.tail.surface);
  }
}

struct Toy {
  Dataset data;
  SentenceIndex sentences;
  QueueMap queues;
};

Toy toy_corpus() {
  Toy t;
  for (auto [id, text] : std::vector<std::pair<std::string, std::string>>{
           {"t1", "Ann Lee lives in Rome ."}, {"t2", "Bob lives in New Delhi ."}, {"t3", "Cy lives in Oslo ."}}) {
    const Sentence s = make_sentence(id, text);
    const std::size_t n = s.tokens.size();
    const std::size_t head_end = id == "t1" ? 2 : 1;
    const std::size_t tail_start = id == "t2" ? 3 : 3 + (head_end - 1);
    t.data.push_back(Instance{
        s, {Triple{mention(s, 0, head_end, "people"), "place_lived", mention(s, tail_start, n - 1, "place")}}});
  }
  t.sentences = index_sentences(t.data);
  HashEmbedder h(16);
  MatchOptions o;
  t.queues = build_queues(group_blocks(encode_dataset(t.data).blocks, RelationSchema::from_dataset(t.data)),
                          t.sentences, h, o);
  return t;
}

QueueMap fixture_queues(const Dataset& d, double floor) {
  HashEmbedder h(32);
  MatchOptions o;
  o.floor = floor;
  return build_queues(group_blocks(encode_dataset(d).blocks, RelationSchema::from_dataset(d)),
                      index_sentences(d), h, o);
}

}  // namespace

TEST_CASE("entity replacement updates every triple naming the entity") {
  const Instance inst = shared_entity_instance();
  const auto r = apply_steps(inst.sentence, inst.triples, {step(Role::head, 0, "Amy Grant")},
                             AugmentMode::head_only);
  REQUIRE(r.instance.has_value());
  const auto& out = *r.instance;
  CHECK(out.sentence.text ==
        "At Arkansas , the freshman Amy Grant led the Razorbacks in a 24-23 double-overtime upset of Alabama .");
  CHECK(out.triples[0].head.surface == "Amy Grant");
  CHECK(out.triples[1].tail.surface == "Amy Grant");
  CHECK(out.triples[1].head.surface == "Razorbacks");
  CHECK(out.triples[0].head.tag == "people");
  check_aligned(out.sentence, out.triples);
  CHECK(out.provenance.source_id == "case-1");
  CHECK(out.provenance.replaced_roles == std::vector<Role>{Role::head});
}

TEST_CASE("tail and relation replacement") {
  const Instance inst = shared_entity_instance();
  const auto tail = apply_steps(inst.sentence, inst.triples, {step(Role::tail, 0, "Nashville")},
                                AugmentMode::tail_only);
  REQUIRE(tail.instance.has_value());
  CHECK(tail.instance->sentence.text.rfind("At Nashville , the freshman Mitch Mustain", 0) == 0);
  CHECK(tail.instance->triples[0].tail.surface == "Nashville");
  check_aligned(tail.instance->sentence, tail.instance->triples);

  const auto rel = apply_steps(inst.sentence, inst.triples,
                               {step(Role::relation, 0, ", the senior", "location")}, AugmentMode::relation_only);
  REQUIRE(rel.instance.has_value());
  CHECK(rel.instance->sentence.text.rfind("At Arkansas , the senior Mitch Mustain", 0) == 0);
  CHECK(rel.instance->triples[0].relation == "location");
  CHECK(rel.instance->triples[1].relation == "contain");
  check_aligned(rel.instance->sentence, rel.instance->triples);
}

TEST_CASE("a longer replacement shifts later mentions by the length difference") {
  const Instance inst = shared_entity_instance();
  const auto r = apply_steps(inst.sentence, inst.triples, {step(Role::head, 0, "Mary Jo Smith")},
                             AugmentMode::head_only);
  REQUIRE(r.instance.has_value());
  // oracle: plain substring replacement of the text
  std::string want = inst.sentence.text;
  want.replace(want.find("Mitch Mustain"), std::string("Mitch Mustain").size(), "Mary Jo Smith");
  CHECK(r.instance->sentence.text == want);
  const auto& t = r.instance->triples;
  CHECK(t[0].head.token_start == 5);
  CHECK(t[0].head.token_end == 8);
  CHECK(t[1].head.token_start == 10);
  CHECK(t[1].head.token_end == 11);
  CHECK(t[0].tail.token_start == 1);
  check_aligned(r.instance->sentence, t);
}

TEST_CASE("edits that would cut a mention are discarded") {
  const Sentence s = make_sentence("s", "New York Times reported from New York");
  const std::vector<Triple> triples{
      Triple{mention(s, 0, 3, "group"), "located_in", mention(s, 5, 7, "place")}};
  // "New York" also occurs inside the head mention; that occurrence is not rewritten
  const auto r = apply_steps(s, triples, {step(Role::tail, 0, "Boston")}, AugmentMode::tail_only);
  REQUIRE(r.instance.has_value());
  CHECK(r.instance->sentence.text == "New York Times reported from Boston");
  const auto bad = apply_steps(s, triples, {step(Role::relation, 0, "")}, AugmentMode::relation_only);
  CHECK_FALSE(bad.instance.has_value());
}

TEST_CASE("unsatisfiable threshold yields nothing; cap keeps the best") {
  const Dataset d = fixture_corpus();
  const auto q = fixture_queues(d, 0.5);
  AugmentPolicy p;
  p.mode = AugmentMode::head_only;
  p.epsilon = 1.01;
  CHECK(augment_dataset(d, q, p).empty());
  p.epsilon = 0.6;
  p.max_per_sentence = 3;
  const auto three = augment_dataset(d, q, p);
  p.max_per_sentence = 2;
  const auto two = augment_dataset(d, q, p);
  std::map<std::string, std::vector<std::string>> by3, by2;
  for (const auto& a : three) by3[a.provenance.source_id].push_back(a.sentence.text);
  for (const auto& a : two) by2[a.provenance.source_id].push_back(a.sentence.text);
  REQUIRE_FALSE(by2.empty());
  for (const auto& [src, texts] : by2) {
    CHECK(texts.size() <= 2);
    const auto& full = by3.at(src);
    CHECK(std::equal(texts.begin(), texts.end(), full.begin()));
  }
  p.epsilon = -0.1;
  CHECK_THROWS_AS(augment_dataset(d, q, p), Error);
}

TEST_CASE("ht_only matches a brute-force enumeration on a toy corpus") {
  const Toy toy = toy_corpus();
  AugmentPolicy p;
  p.mode = AugmentMode::ht_only;
  p.epsilon = 0.0;
  p.max_per_sentence = 3;
  const auto got = augment_dataset(toy.data, toy.queues, p);

  std::vector<std::tuple<std::string, std::string, std::vector<double>>> want;
  for (const auto& inst : toy.data) {
    std::vector<const MatchCandidate*> heads, tails;
    for (const auto& [key, queue] : toy.queues) {
      for (const auto& c : queue.entries) {
        if (c.source.source_sentence != inst.sentence.id) continue;
        if (c.source.role == Role::head) heads.push_back(&c);
        if (c.source.role == Role::tail) tails.push_back(&c);
      }
    }
    auto by = [](const MatchCandidate* a, const MatchCandidate* b) { return candidate_before(*a, *b); };
    std::sort(heads.begin(), heads.end(), by);
    std::sort(tails.begin(), tails.end(), by);
    // merged position: score desc, then list, then rank
    std::vector<std::tuple<double, std::size_t, std::size_t>> merged;
    for (std::size_t i = 0; i < heads.size(); ++i) merged.emplace_back(-heads[i]->hybrid, 0, i);
    for (std::size_t i = 0; i < tails.size(); ++i) merged.emplace_back(-tails[i]->hybrid, 1, i);
    std::sort(merged.begin(), merged.end());
    auto pos = [&](std::size_t list, std::size_t rank) {
      for (std::size_t k = 0; k < merged.size(); ++k) {
        if (std::get<1>(merged[k]) == list && std::get<2>(merged[k]) == rank) return k;
      }
      return merged.size();
    };
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> combos;
    for (std::size_t i = 0; i < heads.size(); ++i) {
      for (std::size_t j = 0; j < tails.size(); ++j) combos.emplace_back(std::max(pos(0, i), pos(1, j)), i, j);
    }
    std::sort(combos.begin(), combos.end());
    std::set<std::string> seen;
    std::size_t produced = 0;
    for (const auto& [worst, i, j] : combos) {
      if (produced == p.max_per_sentence) break;
      auto r = apply_steps(inst.sentence, inst.triples, {step_from(*heads[i]), step_from(*tails[j])},
                           AugmentMode::ht_only);
      if (!r.instance || r.instance->sentence.text == inst.sentence.text) continue;
      if (!seen.insert(r.instance->sentence.text).second) continue;
      want.emplace_back(inst.sentence.id + "~aug" + std::to_string(produced++), r.instance->sentence.text,
                        std::vector<double>{heads[i]->hybrid, tails[j]->hybrid});
    }
  }
  REQUIRE(got.size() == want.size());
  CHECK(got.size() == 9);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].sentence.id == std::get<0>(want[i]));
    CHECK(got[i].sentence.text == std::get<1>(want[i]));
    CHECK(got[i].provenance.theta == std::get<2>(want[i]));
  }
}

TEST_CASE("combination stream enumerates every tuple once in the documented order") {
  const std::vector<std::vector<double>> lists{{0.9, 0.5, 0.2}, {0.8, 0.8}, {0.7, 0.6, 0.1}};
  ComboStream stream(lists);
  std::vector<std::vector<std::size_t>> got;
  double last = std::numeric_limits<double>::infinity();
  while (true) {
    const double s = stream.peek_score();
    auto next = stream.next();
    if (!next) break;
    double worst = 1e9;
    for (std::size_t l = 0; l < lists.size(); ++l) worst = std::min(worst, lists[l][(*next)[l]]);
    CHECK(s == worst);
    CHECK(s <= last);
    last = s;
    got.push_back(*next);
  }
  CHECK(stream.peek_score() == -std::numeric_limits<double>::infinity());
  CHECK(got.size() == 18);
  CHECK(std::set<std::vector<std::size_t>>(got.begin(), got.end()).size() == 18);
  CHECK(got.front() == std::vector<std::size_t>{0, 0, 0});
  CHECK(got.back() == std::vector<std::size_t>{2, 1, 2});
  ComboStream with_empty({{0.5}, {}});
  CHECK_FALSE(with_empty.next().has_value());
}

TEST_CASE("coherence prefers the candidate keeping the source syntax") {
  const Sentence source = make_sentence("src", "South Africa, and the rest of Africa.");
  const Sentence text1 = make_sentence("c1", "South Africa is a part of Africa.");
  const Sentence text2 = make_sentence("c2", "North Africa, and the rest of Africa.");
  const double nu1 = coherence_score(source, text1).nu;
  const double nu2 = coherence_score(source, text2).nu;
  CHECK(nu1 < nu2);
  CHECK(coherence_score(source, source).nu == 1.0);
  CHECK(coherence_score(make_sentence("a", "Paris is big"), make_sentence("b", "Rome is big")).nu == 1.0);
  CHECK(nu1 >= 0.0);
}

TEST_CASE("fixture augmentation keeps mentions aligned and triple counts fixed") {
  const Dataset d = fixture_corpus();
  const auto q = fixture_queues(d, 0.5);
  std::map<std::string, const Instance*> by_id;
  for (const auto& inst : d) by_id[inst.sentence.id] = &inst;
  AugmentPolicy p;
  p.epsilon = 0.7;
  AugmentStats stats;
  const auto out = augment_dataset(d, q, p, &stats);
  REQUIRE_FALSE(out.empty());
  CHECK(stats.produced == out.size());
  std::size_t discarded = 0;
  for (const auto& [reason, n] : stats.discarded) discarded += n;
  CHECK(stats.proposals == stats.produced + discarded);
  std::set<std::string> ids;
  for (const auto& a : out) {
    const Instance& src = *by_id.at(a.provenance.source_id);
    CHECK(a.triples.size() == src.triples.size());
    CHECK(a.sentence.text != src.sentence.text);
    CHECK(ids.insert(a.sentence.id).second);
    CHECK(a.sentence.id.rfind(src.sentence.id + "~aug", 0) == 0);
    check_aligned(a.sentence, a.triples);
    for (double th : a.provenance.theta) CHECK(th >= 0.7);
    CHECK(a.provenance.replaced_roles.size() == 3);
  }
  CHECK(augmented_to_jsonl(out) == augmented_to_jsonl(augment_dataset(d, q, p)));
  const auto back = augmented_from_jsonl(augmented_to_jsonl(out));
  REQUIRE(back.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(back[i].sentence == out[i].sentence);
    CHECK(back[i].triples == out[i].triples);
    CHECK(back[i].provenance == out[i].provenance);
  }
}

TEST_CASE("volume grows as the threshold drops, per role") {
  const Dataset d = fixture_corpus();
  const auto q = fixture_queues(d, 0.5);
  for (AugmentMode mode : {AugmentMode::head_only, AugmentMode::relation_only, AugmentMode::tail_only}) {
    AugmentPolicy p;
    p.mode = mode;
    std::size_t previous = 0;
    for (double eps : {0.95, 0.9, 0.8, 0.7, 0.6, 0.5}) {
      p.epsilon = eps;
      const std::size_t n = augment_dataset(d, q, p).size();
      CHECK(n >= previous);
      previous = n;
    }
    CHECK(previous > 0);
  }
}
