#include <algorithm>
#include <cmath>

#include "ssdau/corpus.hpp"
#include "ssdau/error.hpp"

namespace ssdau {

std::size_t encode_span_lengths(std::size_t head_len, std::size_t tail_len) {
  if (head_len == 0 || tail_len == 0) {
    throw Error(ErrorKind::config, "span lengths must be positive");
  }
  const std::size_t shell = std::max(head_len, tail_len);
  const std::size_t base = (shell - 1) * (shell - 1);
  const std::size_t offset = head_len == shell ? tail_len - 1 : shell + head_len - 1;
  return 1 + base + offset;
}

std::pair<std::size_t, std::size_t> decode_span_lengths(std::size_t tag) {
  if (tag == 0) throw Error(ErrorKind::config, "null tag has no span lengths");
  const std::size_t t = tag - 1;
  std::size_t shell = static_cast<std::size_t>(std::sqrt(static_cast<double>(t)));
  while (shell * shell > t) --shell;
  while ((shell + 1) * (shell + 1) <= t) ++shell;
  const std::size_t offset = t - shell * shell;
  ++shell;
  if (offset < shell) return {shell, offset + 1};
  return {offset - shell + 1, shell};
}

std::size_t tag_vocab_for_max_span(std::size_t max_span_length) {
  return 1 + max_span_length * max_span_length;
}

TagAssignment triples_to_tags(const Sentence& sentence, const std::vector<Triple>& triples,
                              const RelationSchema& schema, std::size_t tag_vocab_size) {
  TagAssignment out;
  out.n = sentence.tokens.size();
  out.k = schema.size();
  out.tag_vocab_size = tag_vocab_size;
  for (const auto& t : triples) {
    const std::size_t rel = schema.require(t.relation);
    if (t.head.token_end > out.n || t.tail.token_end > out.n || t.head.length() == 0 ||
        t.tail.length() == 0) {
      throw Error(ErrorKind::alignment, "triple span outside sentence " + sentence.id);
    }
    const std::size_t tag = encode_span_lengths(t.head.length(), t.tail.length());
    if (tag >= tag_vocab_size) {
      throw Error(ErrorKind::config, "entity span too long for tag vocabulary in sentence " +
                                         sentence.id);
    }
    out.entries.push_back(TagEntry{t.head.token_start, rel, t.tail.token_start, tag});
  }
  std::sort(out.entries.begin(), out.entries.end());
  out.entries.erase(std::unique(out.entries.begin(), out.entries.end()), out.entries.end());
  for (std::size_t i = 1; i < out.entries.size(); ++i) {
    const auto& a = out.entries[i - 1];
    const auto& b = out.entries[i];
    if (a.head == b.head && a.relation == b.relation && a.tail == b.tail) {
      throw Error(ErrorKind::schema, "two triples share a tag cell in sentence " + sentence.id);
    }
  }
  return out;
}

std::vector<Triple> tags_to_triples(const Sentence& sentence, const TagAssignment& tags,
                                    const RelationSchema& schema) {
  std::vector<Triple> out;
  out.reserve(tags.entries.size());
  for (const auto& e : tags.entries) {
    auto [hl, tl] = decode_span_lengths(e.tag);
    if (e.relation >= schema.size() || e.head + hl > sentence.tokens.size() ||
        e.tail + tl > sentence.tokens.size()) {
      throw Error(ErrorKind::alignment, "tag entry outside sentence " + sentence.id);
    }
    Triple t;
    t.head = EntityMention{e.head, e.head + hl, span_text(sentence, e.head, e.head + hl), {}};
    t.relation = schema.relations()[e.relation];
    t.tail = EntityMention{e.tail, e.tail + tl, span_text(sentence, e.tail, e.tail + tl), {}};
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace ssdau
