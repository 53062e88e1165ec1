#include "ssdau/pos.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <unordered_map>

#include "ssdau/util.hpp"

namespace ssdau {

const char* to_string(Pos pos) {
  static constexpr const char* kNames[] = {"NOUN", "PROPN", "VERB",  "AUX", "ADJ",
                                           "ADV",  "ADP",   "DET",   "PRON", "CCONJ",
                                           "SCONJ", "NUM",  "PUNCT", "PART", "SYM"};
  return kNames[static_cast<int>(pos)];
}

namespace {

const std::unordered_map<std::string, Pos>& lexicon() {
  static const auto* lex = [] {
    auto* m = new std::unordered_map<std::string, Pos>;
    auto add = [m](Pos p, std::initializer_list<const char*> words) {
      for (const char* w : words) m->emplace(w, p);
    };
    add(Pos::det, {"a", "an", "the", "this", "that", "these", "those", "each", "every", "some",
                   "any", "no", "another", "all", "both", "either", "neither"});
    add(Pos::pron, {"i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them",
                    "my", "your", "his", "its", "our", "their", "who", "whom", "whose", "which",
                    "what", "himself", "herself", "itself", "themselves"});
    add(Pos::adp, {"at", "in", "on", "of", "for", "to", "from", "with", "by", "about", "into",
                   "over", "under", "after", "before", "between", "through", "during", "near",
                   "across", "against", "among", "around", "within", "without", "via", "per",
                   "toward", "towards", "upon", "outside", "inside", "like", "since"});
    add(Pos::cconj, {"and", "or", "but", "nor", "yet", "so"});
    add(Pos::sconj, {"because", "although", "though", "while", "if", "unless", "whereas",
                     "whether", "when", "where", "as"});
    add(Pos::aux, {"is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had",
                   "do", "does", "did", "will", "would", "can", "could", "shall", "should", "may",
                   "might", "must"});
    add(Pos::adv, {"not", "very", "also", "too", "just", "only", "still", "already", "now",
                   "then", "there", "here", "soon", "often", "never", "always", "again"});
    add(Pos::part, {"'s", "s", "'"});
    add(Pos::num, {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
                   "hundred", "thousand", "million", "billion"});
    return m;
  }();
  return *lex;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() + 1 && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

Pos tag_token(std::string_view surface) {
  if (surface.empty()) return Pos::sym;
  const auto first = static_cast<unsigned char>(surface.front());
  if (surface.size() == 1 && std::ispunct(first)) {
    static constexpr std::string_view kSymbols = "$%&+<=>@^|~#*";
    return kSymbols.find(surface.front()) != std::string_view::npos ? Pos::sym : Pos::punct;
  }
  if (std::all_of(surface.begin(), surface.end(),
                  [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    return Pos::num;
  }
  const std::string lower = to_lower(surface);
  if (auto it = lexicon().find(lower); it != lexicon().end()) return it->second;
  if (std::isupper(first)) return Pos::propn;
  if (std::isdigit(first)) return Pos::num;
  if (ends_with(lower, "ly")) return Pos::adv;
  if (ends_with(lower, "ing") || ends_with(lower, "ed") || ends_with(lower, "ize") ||
      ends_with(lower, "ise")) {
    return Pos::verb;
  }
  if (ends_with(lower, "ous") || ends_with(lower, "ful") || ends_with(lower, "ive") ||
      ends_with(lower, "able") || ends_with(lower, "ible") || ends_with(lower, "al") ||
      ends_with(lower, "ic") || ends_with(lower, "less") || ends_with(lower, "ish")) {
    return Pos::adj;
  }
  return Pos::noun;
}

std::vector<Pos> pos_pattern(std::span<const Token> tokens) {
  std::vector<Pos> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(tag_token(t.surface));
  return out;
}

std::vector<Pos> pos_pattern(std::string_view text) {
  const auto tokens = tokenize(text);
  return pos_pattern(tokens);
}

double pattern_similarity(std::span<const Pos> a, std::span<const Pos> b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  const std::size_t d = edit_distance(a, b);
  return 1.0 - static_cast<double>(d) / static_cast<double>(longest);
}

}  // namespace ssdau
