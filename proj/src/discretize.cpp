#include "ssdau/discretize.hpp"

#include <algorithm>

#include "ssdau/error.hpp"

namespace ssdau {

const char* to_string(Role role) {
  switch (role) {
    case Role::head: return "head";
    case Role::relation: return "relation";
    case Role::tail: return "tail";
  }
  return "?";
}

std::optional<Role> parse_role(std::string_view name) {
  if (name == "head") return Role::head;
  if (name == "relation") return Role::relation;
  if (name == "tail") return Role::tail;
  return std::nullopt;
}

const char* to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::labeled: return "labeled";
    case SplitMode::no_label: return "no_label";
    case SplitMode::full: return "full";
  }
  return "?";
}

std::optional<SplitMode> parse_split_mode(std::string_view name) {
  if (name == "labeled") return SplitMode::labeled;
  if (name == "no_label") return SplitMode::no_label;
  if (name == "full") return SplitMode::full;
  return std::nullopt;
}

std::string to_string(const GroupKey& key) {
  return std::string(to_string(key.role)) + "/" + key.relation + "/" + key.entity_tag;
}

namespace {

GroupKey make_key(Role role, const Triple& t, const std::string& entity_tag, SplitMode mode) {
  switch (mode) {
    case SplitMode::labeled:
      if (role == Role::relation) return GroupKey{role, "", t.head.tag + "|" + t.tail.tag};
      return GroupKey{role, t.relation, entity_tag};
    case SplitMode::no_label:
      return GroupKey{role, role == Role::relation ? "" : t.relation, ""};
    case SplitMode::full:
      return GroupKey{role, "", ""};
  }
  return {};
}

TextBlock make_block(const Sentence& s, std::size_t triple_index, const Triple& t, Role role,
                     Cut cut, std::size_t width, SplitMode mode) {
  TextBlock b;
  b.role = role;
  b.cut = cut;
  b.span_text = span_text(s, cut.token_start, cut.token_end);
  b.label_tag = role == Role::head ? t.head.tag : role == Role::tail ? t.tail.tag : t.relation;
  const std::size_t left_begin = cut.token_start >= width ? cut.token_start - width : 0;
  const std::size_t right_end = std::min(s.tokens.size(), cut.token_end + width);
  for (std::size_t i = left_begin; i < cut.token_start; ++i) b.context_tokens.push_back(s.tokens[i].surface);
  b.left_context = b.context_tokens.size();
  for (std::size_t i = cut.token_end; i < right_end; ++i) b.context_tokens.push_back(s.tokens[i].surface);
  b.source_sentence = s.id;
  b.source_triple = triple_index;
  b.relation = t.relation;
  b.group = make_key(role, t, role == Role::relation ? std::string() : b.label_tag, mode);
  return b;
}

}  // namespace

EncodeResult encode(const Sentence& sentence, const std::vector<Triple>& triples,
                    std::size_t context_width, SplitMode mode) {
  EncodeResult out;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    const bool overlap =
        t.head.token_start < t.tail.token_end && t.tail.token_start < t.head.token_end;
    if (overlap) {
      out.skipped.push_back(sentence.id + "#" + std::to_string(i) +
                            ": head and tail spans overlap");
      continue;
    }
    const Cut head{t.head.token_start, t.head.token_end};
    const Cut tail{t.tail.token_start, t.tail.token_end};
    const Cut relation = head.token_end <= tail.token_start ? Cut{head.token_end, tail.token_start}
                                                            : Cut{tail.token_end, head.token_start};
    out.blocks.push_back(make_block(sentence, i, t, Role::head, head, context_width, mode));
    out.blocks.push_back(make_block(sentence, i, t, Role::relation, relation, context_width, mode));
    out.blocks.push_back(make_block(sentence, i, t, Role::tail, tail, context_width, mode));
  }
  return out;
}

EncodeResult encode_dataset(const Dataset& dataset, std::size_t context_width, SplitMode mode) {
  std::vector<const Instance*> order;
  order.reserve(dataset.size());
  for (const auto& inst : dataset) order.push_back(&inst);
  std::stable_sort(order.begin(), order.end(), [](const Instance* a, const Instance* b) {
    return a->sentence.id < b->sentence.id;
  });
  EncodeResult out;
  for (const Instance* inst : order) {
    auto r = encode(inst->sentence, inst->triples, context_width, mode);
    std::move(r.blocks.begin(), r.blocks.end(), std::back_inserter(out.blocks));
    std::move(r.skipped.begin(), r.skipped.end(), std::back_inserter(out.skipped));
  }
  return out;
}

std::string reconstruct(const Sentence& sentence, const std::vector<TextBlock>& blocks) {
  const std::size_t n = sentence.tokens.size();
  std::vector<const std::string*> surface(n, nullptr);
  std::vector<std::string> pieces;
  for (const auto& b : blocks) {
    auto fail = [&](const std::string& why) {
      throw Error(ErrorKind::reconstruct, "block " + b.source_sentence + "#" +
                                              std::to_string(b.source_triple) + "/" +
                                              to_string(b.role) + ": " + why);
    };
    if (b.source_sentence != sentence.id) fail("belongs to another sentence");
    if (b.cut.token_start > b.cut.token_end || b.cut.token_end > n) fail("cut out of bounds");
    if (span_text(sentence, b.cut.token_start, b.cut.token_end) != b.span_text) {
      fail("span text does not match the cut");
    }
    const std::size_t left_begin = b.cut.token_start - std::min(b.cut.token_start, b.left_context);
    if (b.left_context > b.cut.token_start ||
        b.cut.token_end + (b.context_tokens.size() - b.left_context) > n) {
      fail("context extends past the sentence");
    }
    for (std::size_t i = 0; i < b.context_tokens.size(); ++i) {
      const std::size_t tok = i < b.left_context ? left_begin + i : b.cut.token_end + (i - b.left_context);
      if (sentence.tokens[tok].surface != b.context_tokens[i]) fail("context token mismatch");
    }
    // Split the span back into per-token surfaces.
    const std::size_t base = b.cut.token_start < b.cut.token_end
                                 ? sentence.tokens[b.cut.token_start].char_start
                                 : 0;
    for (std::size_t t = b.cut.token_start; t < b.cut.token_end; ++t) {
      const auto& tok = sentence.tokens[t];
      pieces.push_back(b.span_text.substr(tok.char_start - base, tok.char_end - tok.char_start));
    }
  }
  // Second pass assigns pointers once `pieces` stops growing.
  std::size_t p = 0;
  for (const auto& b : blocks) {
    for (std::size_t t = b.cut.token_start; t < b.cut.token_end; ++t, ++p) {
      if (surface[t] != nullptr && *surface[t] != pieces[p]) {
        throw Error(ErrorKind::reconstruct, "overlapping blocks disagree in sentence " + sentence.id);
      }
      surface[t] = &pieces[p];
    }
  }
  std::string text;
  text.reserve(sentence.text.size());
  std::size_t pos = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& tok = sentence.tokens[t];
    text.append(sentence.text, pos, tok.char_start - pos);
    text += surface[t] ? *surface[t] : tok.surface;
    pos = tok.char_end;
  }
  text.append(sentence.text, pos, std::string::npos);
  return text;
}

BlockLibrary group_blocks(const std::vector<TextBlock>& blocks, const RelationSchema& schema) {
  BlockLibrary lib;
  for (const auto& b : blocks) {
    if (!b.group.relation.empty()) schema.require(b.group.relation);
    if (b.role != Role::relation && !b.group.entity_tag.empty() && !schema.entity_tags().empty() &&
        !schema.has_tag(b.group.entity_tag)) {
      throw Error(ErrorKind::schema, "entity tag not in schema: " + b.group.entity_tag);
    }
    lib[b.group].push_back(b);
  }
  for (auto& [key, group] : lib) {
    std::stable_sort(group.begin(), group.end(),
                     [](const TextBlock& a, const TextBlock& b) { return a.ref() < b.ref(); });
  }
  return lib;
}

}  // namespace ssdau

namespace ssdau {

SentenceIndex index_sentences(const Dataset& dataset) {
  SentenceIndex index;
  for (const auto& inst : dataset) {
    if (!index.emplace(inst.sentence.id, inst.sentence).second) {
      throw Error(ErrorKind::config, "duplicate sentence id: " + inst.sentence.id);
    }
  }
  return index;
}

}  // namespace ssdau
