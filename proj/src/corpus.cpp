#include "ssdau/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ssdau/error.hpp"
#include "ssdau/util.hpp"

namespace ssdau {

using nlohmann::json;

RelationSchema::RelationSchema(std::vector<std::string> relations, std::set<std::string> entity_tags)
    : relations_(std::move(relations)), entity_tags_(std::move(entity_tags)) {
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    if (!index_.emplace(relations_[i], i).second) {
      throw Error(ErrorKind::schema, "duplicate relation name: " + relations_[i]);
    }
  }
}

RelationSchema RelationSchema::from_dataset(const Dataset& dataset) {
  std::vector<std::string> relations;
  std::set<std::string> seen, tags;
  for (const auto& inst : dataset) {
    for (const auto& t : inst.triples) {
      if (seen.insert(t.relation).second) relations.push_back(t.relation);
      tags.insert(t.head.tag);
      tags.insert(t.tail.tag);
    }
  }
  return RelationSchema(std::move(relations), std::move(tags));
}

std::optional<std::size_t> RelationSchema::index_of(std::string_view relation) const {
  auto it = index_.find(relation);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t RelationSchema::require(std::string_view relation) const {
  auto idx = index_of(relation);
  if (!idx) throw Error(ErrorKind::schema, "relation not in schema: " + std::string(relation));
  return *idx;
}

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80 || c == '_'; }

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (is_word_byte(c)) {
      while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
    }
    tokens.push_back(Token{std::string(text.substr(i, j - i)), i, j});
    i = j;
  }
  return tokens;
}

Sentence make_sentence(std::string id, std::string text) {
  Sentence s{std::move(id), std::move(text), {}};
  s.tokens = tokenize(s.text);
  return s;
}

std::pair<std::size_t, std::size_t> char_range(const Sentence& s, std::size_t token_start,
                                               std::size_t token_end) {
  if (token_start < token_end) {
    return {s.tokens[token_start].char_start, s.tokens[token_end - 1].char_end};
  }
  const std::size_t pos = token_start == 0 ? 0 : s.tokens[token_start - 1].char_end;
  return {pos, pos};
}

std::string span_text(const Sentence& s, std::size_t token_start, std::size_t token_end) {
  if (token_start >= token_end) return {};
  auto [b, e] = char_range(s, token_start, token_end);
  return s.text.substr(b, e - b);
}

void validate_instance(const Instance& inst, std::size_t max_tokens) {
  const auto& s = inst.sentence;
  if (s.tokens.size() > max_tokens) {
    throw Error(ErrorKind::config, "sentence " + s.id + " exceeds max length");
  }
  std::size_t prev_end = 0;
  for (const auto& t : s.tokens) {
    if (t.char_start < prev_end || t.char_end <= t.char_start || t.char_end > s.text.size() ||
        s.text.compare(t.char_start, t.char_end - t.char_start, t.surface) != 0) {
      throw Error(ErrorKind::alignment, "token invariant violated in sentence " + s.id);
    }
    prev_end = t.char_end;
  }
  auto check = [&](const EntityMention& m) {
    if (!(m.token_start < m.token_end && m.token_end <= s.tokens.size()) ||
        span_text(s, m.token_start, m.token_end) != m.surface) {
      throw Error(ErrorKind::alignment,
                  "mention '" + m.surface + "' does not match text of sentence " + s.id);
    }
  };
  for (const auto& t : inst.triples) {
    check(t.head);
    check(t.tail);
  }
}

std::optional<InputFormat> parse_input_format(std::string_view name) {
  if (name == "jsonl") return InputFormat::jsonl;
  if (name == "nyt_json" || name == "nyt") return InputFormat::nyt_json;
  if (name == "webnlg_json" || name == "webnlg") return InputFormat::webnlg_json;
  return std::nullopt;
}

const char* to_string(InputFormat format) {
  switch (format) {
    case InputFormat::jsonl: return "jsonl";
    case InputFormat::nyt_json: return "nyt_json";
    case InputFormat::webnlg_json: return "webnlg_json";
  }
  return "?";
}

namespace {

struct RawMention {
  std::string surface;
  std::optional<std::size_t> char_start;
  std::string tag;
};

struct RawTriple {
  RawMention head;
  std::string relation;
  RawMention tail;
};

struct RawRecord {
  std::string id;
  std::string text;
  std::vector<RawTriple> triples;
};

[[noreturn]] void malformed(std::size_t index, const std::string& why) {
  throw Error(ErrorKind::parse, "malformed record " + std::to_string(index) + ": " + why);
}

RawMention parse_mention(const json& j, std::size_t index) {
  if (!j.is_object() || !j.contains("surface") || !j["surface"].is_string()) {
    malformed(index, "mention needs a string 'surface'");
  }
  RawMention m;
  m.surface = j["surface"].get<std::string>();
  if (j.contains("char_start") && !j["char_start"].is_null()) {
    if (!j["char_start"].is_number_unsigned() && !j["char_start"].is_number_integer()) {
      malformed(index, "char_start must be an integer");
    }
    const auto v = j["char_start"].get<long long>();
    if (v < 0) malformed(index, "char_start must be nonnegative");
    m.char_start = static_cast<std::size_t>(v);
  }
  m.tag = j.value("tag", std::string("entity"));
  return m;
}

RawRecord parse_native(const json& j, std::size_t index) {
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
    malformed(index, "expected object with string 'text'");
  }
  RawRecord r;
  r.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>()
                                                 : "rec-" + std::to_string(index);
  r.text = j["text"].get<std::string>();
  if (j.contains("triples")) {
    if (!j["triples"].is_array()) malformed(index, "'triples' must be an array");
    for (const auto& t : j["triples"]) {
      if (!t.is_object() || !t.contains("relation") || !t["relation"].is_string() ||
          !t.contains("head") || !t.contains("tail")) {
        malformed(index, "triple needs head, relation, tail");
      }
      r.triples.push_back(RawTriple{parse_mention(t["head"], index), t["relation"].get<std::string>(),
                                    parse_mention(t["tail"], index)});
    }
  }
  return r;
}

// CasRel-style record: {"text": ..., "triple_list": [[head, relation, tail], ...]}.
RawRecord parse_casrel(const json& j, std::size_t index, InputFormat format) {
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
    malformed(index, "expected object with string 'text'");
  }
  if (j.contains("triples")) return parse_native(j, index);
  RawRecord r;
  r.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>()
                                                 : "rec-" + std::to_string(index);
  r.text = j["text"].get<std::string>();
  const json& list = j.contains("triple_list") ? j["triple_list"] : json::array();
  if (!list.is_array()) malformed(index, "'triple_list' must be an array");
  for (const auto& t : list) {
    if (!t.is_array() || t.size() != 3 || !t[0].is_string() || !t[1].is_string() ||
        !t[2].is_string()) {
      malformed(index, "triple_list entries must be [head, relation, tail] strings");
    }
    RawTriple rt;
    rt.head.surface = t[0].get<std::string>();
    rt.relation = t[1].get<std::string>();
    rt.tail.surface = t[2].get<std::string>();
    rt.head.tag = rt.tail.tag = "entity";
    if (format == InputFormat::nyt_json && !rt.relation.empty() && rt.relation[0] == '/') {
      // "/people/person/place_lived": the middle segment types the head.
      std::vector<std::string> parts;
      std::stringstream ss(rt.relation.substr(1));
      for (std::string part; std::getline(ss, part, '/');) parts.push_back(part);
      if (parts.size() >= 2) rt.head.tag = parts[1];
    }
    r.triples.push_back(std::move(rt));
  }
  return r;
}

std::vector<json> split_records(std::string_view contents) {
  std::vector<json> records;
  std::size_t first = contents.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return records;
  if (contents[first] == '[') {
    json all;
    try {
      all = json::parse(contents);
    } catch (const json::parse_error& e) {
      malformed(0, e.what());
    }
    for (auto& r : all) records.push_back(std::move(r));
    return records;
  }
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    std::string_view line = contents.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      malformed(records.size(), e.what());
    }
  }
  return records;
}

// Token index whose range starts (or ends) exactly at a byte offset.
std::optional<std::size_t> token_starting_at(const Sentence& s, std::size_t pos) {
  auto it = std::lower_bound(s.tokens.begin(), s.tokens.end(), pos,
                             [](const Token& t, std::size_t p) { return t.char_start < p; });
  if (it == s.tokens.end() || it->char_start != pos) return std::nullopt;
  return static_cast<std::size_t>(it - s.tokens.begin());
}

std::optional<std::size_t> token_ending_at(const Sentence& s, std::size_t pos) {
  auto it = std::lower_bound(s.tokens.begin(), s.tokens.end(), pos,
                             [](const Token& t, std::size_t p) { return t.char_end < p; });
  if (it == s.tokens.end() || it->char_end != pos) return std::nullopt;
  return static_cast<std::size_t>(it - s.tokens.begin());
}

EntityMention resolve_mention(const Sentence& s, const RawMention& raw, LoadReport& report) {
  if (raw.surface.empty()) {
    throw Error(ErrorKind::alignment, "empty entity surface in sentence " + s.id);
  }
  auto aligned = [&](std::size_t start) -> std::optional<EntityMention> {
    auto ts = token_starting_at(s, start);
    auto te = token_ending_at(s, start + raw.surface.size());
    if (!ts || !te || *te < *ts) return std::nullopt;
    return EntityMention{*ts, *te + 1, raw.surface, raw.tag};
  };
  if (raw.char_start) {
    const std::size_t start = *raw.char_start;
    if (start + raw.surface.size() > s.text.size() ||
        s.text.compare(start, raw.surface.size(), raw.surface) != 0) {
      throw Error(ErrorKind::alignment, "entity '" + raw.surface + "' not found at offset " +
                                            std::to_string(start) + " in sentence " + s.id);
    }
    if (auto m = aligned(start)) return *m;
    throw Error(ErrorKind::alignment, "entity '" + raw.surface +
                                          "' does not fall on token boundaries in sentence " + s.id);
  }
  for (std::size_t pos = s.text.find(raw.surface); pos != std::string::npos;
       pos = s.text.find(raw.surface, pos + 1)) {
    if (auto m = aligned(pos)) {
      ++report.first_match_resolutions;
      report.warnings.push_back("sentence " + s.id + ": '" + raw.surface +
                                "' resolved by first match");
      return *m;
    }
  }
  throw Error(ErrorKind::alignment, "entity '" + raw.surface + "' not found in sentence " + s.id);
}

}  // namespace

LoadResult parse_dataset(std::string_view contents, InputFormat format, const LoadOptions& options) {
  LoadResult result;
  auto& report = result.report;
  const auto records = split_records(contents);
  std::vector<RawRecord> raws;
  raws.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    raws.push_back(format == InputFormat::jsonl ? parse_native(records[i], i)
                                                : parse_casrel(records[i], i, format));
  }
  report.records = raws.size();

  for (auto& raw : raws) {
    Instance inst;
    inst.sentence = make_sentence(raw.id, raw.text);
    if (inst.sentence.tokens.size() > options.max_tokens) {
      ++report.rejected_too_long;
      continue;
    }
    for (const auto& rt : raw.triples) {
      if (options.schema && !options.schema->index_of(rt.relation)) {
        report.unknown_relations.insert(rt.relation);
        ++report.skipped_triples;
        continue;
      }
      inst.triples.push_back(Triple{resolve_mention(inst.sentence, rt.head, report), rt.relation,
                                    resolve_mention(inst.sentence, rt.tail, report)});
    }
    report.triples += inst.triples.size();
    result.dataset.push_back(std::move(inst));
  }
  report.sentences = result.dataset.size();

  if (!report.unknown_relations.empty() &&
      options.unknown_relations == UnknownRelationPolicy::fail) {
    std::string names;
    for (const auto& r : report.unknown_relations) names += (names.empty() ? "" : ", ") + r;
    throw Error(ErrorKind::schema, "unknown relations: " + names);
  }
  return result;
}

LoadResult load_dataset(const std::string& path, InputFormat format, const LoadOptions& options) {
  return parse_dataset(read_file(path), format, options);
}

namespace {

json mention_json(const Sentence& s, const EntityMention& m) {
  return json{{"surface", m.surface},
              {"char_start", s.tokens.at(m.token_start).char_start},
              {"tag", m.tag}};
}

}  // namespace

std::string dataset_to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& inst : dataset) {
    json triples = json::array();
    for (const auto& t : inst.triples) {
      triples.push_back(json{{"head", mention_json(inst.sentence, t.head)},
                             {"relation", t.relation},
                             {"tail", mention_json(inst.sentence, t.tail)}});
    }
    json rec{{"id", inst.sentence.id}, {"text", inst.sentence.text}, {"triples", triples}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  write_file(path, dataset_to_jsonl(dataset));
}

Dataset inject_perturbation(const Dataset& dataset, const Dataset& foreign, double rate,
                            std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw Error(ErrorKind::config, "perturbation rate must lie in [0, 1]");
  }
  const auto extra = static_cast<std::size_t>(std::llround(rate * static_cast<double>(dataset.size())));
  if (extra > 0 && foreign.empty()) {
    throw Error(ErrorKind::config, "perturbation requested with an empty foreign pool");
  }
  Dataset out = dataset;
  out.reserve(dataset.size() + extra);
  Rng rng(seed);
  std::vector<std::size_t> order(foreign.size());
  std::size_t cursor = order.size();
  for (std::size_t k = 0; k < extra; ++k) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      cursor = 0;
    }
    Instance inst = foreign[order[cursor++]];
    inst.sentence.id = "perturb-" + std::to_string(k) + ":" + inst.sentence.id;
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace ssdau
