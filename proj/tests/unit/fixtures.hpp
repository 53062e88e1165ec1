#pragma once

#include <string>
#include <vector>

#include "ssdau/corpus.hpp"

namespace ssdau::testing {

inline std::string data_path(const std::string& name) { return std::string(SSDAU_TEST_DATA) + "/" + name; }

inline Dataset fixture_corpus() {
  return load_dataset(data_path("fixture_corpus.jsonl"), InputFormat::jsonl).dataset;
}

inline EntityMention mention(const Sentence& s, std::size_t start, std::size_t end, std::string tag) {
  return EntityMention{start, end, span_text(s, start, end), std::move(tag)};
}

// Two triples sharing "Mitch Mustain".
inline Instance shared_entity_instance() {
  Instance inst;
  inst.sentence = make_sentence(
      "case-1", "At Arkansas , the freshman Mitch Mustain led the Razorbacks in a 24-23 double-overtime upset of Alabama .");
  const Sentence& s = inst.sentence;
  // tokens: At(0) Arkansas(1) ,(2) the(3) freshman(4) Mitch(5) Mustain(6) led(7) the(8) Razorbacks(9)
  inst.triples.push_back(Triple{mention(s, 5, 7, "people"), "place_lived", mention(s, 1, 2, "place")});
  inst.triples.push_back(Triple{mention(s, 9, 10, "group"), "contain", mention(s, 5, 7, "people")});
  return inst;
}

// Lowercase word sentences ("w*") and all-digit sentences ("n*"); the test
// embedder keys heavily on token shape, so these form two separated clusters.
inline std::vector<Sentence> planted_clusters() {
  std::vector<Sentence> out;
  const std::vector<std::string> words = {"river boats carry grain", "farmers harvest grain early",
                                          "boats sail down the river", "grain prices rise slowly",
                                          "the river floods farms", "early boats carry farmers"};
  const std::vector<std::string> numbers = {"1999 2001 42", "7 19 2020 5", "300 12 88", "2001 64 9 1",
                                            "15 1999 77", "4 8 15 16 23"};
  for (std::size_t i = 0; i < words.size(); ++i) out.push_back(make_sentence("w" + std::to_string(i), words[i]));
  for (std::size_t i = 0; i < numbers.size(); ++i) out.push_back(make_sentence("n" + std::to_string(i), numbers[i]));
  return out;
}

}  // namespace ssdau::testing
