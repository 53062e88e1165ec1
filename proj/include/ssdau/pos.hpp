#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssdau/corpus.hpp"

namespace ssdau {

// Coarse part-of-speech proxy: closed-class word lists, then suffix and
// orthography heuristics. Good enough to compare syntactic patterns; not a
// tagger.
enum class Pos : unsigned char {
  noun, propn, verb, aux, adj, adv, adp, det, pron, cconj, sconj, num, punct, part, sym,
};

const char* to_string(Pos pos);

Pos tag_token(std::string_view surface);
std::vector<Pos> pos_pattern(std::span<const Token> tokens);
std::vector<Pos> pos_pattern(std::string_view text);

// 1 - levenshtein(a, b) / max(|a|, |b|); 1 when both are empty.
double pattern_similarity(std::span<const Pos> a, std::span<const Pos> b);

}  // namespace ssdau
