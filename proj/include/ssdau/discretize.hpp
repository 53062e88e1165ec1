#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssdau/corpus.hpp"

namespace ssdau {

enum class Role { head, relation, tail };

const char* to_string(Role role);
std::optional<Role> parse_role(std::string_view name);

// How blocks are keyed into groups. `labeled` is the normal mode; the other
// two drop semantic tags (and, for `full`, relation types) from the key and
// exist for ablations.
enum class SplitMode { labeled, no_label, full };

const char* to_string(SplitMode mode);
std::optional<SplitMode> parse_split_mode(std::string_view name);

struct Cut {
  std::size_t token_start = 0;
  std::size_t token_end = 0;

  bool empty() const { return token_start >= token_end; }
  auto operator<=>(const Cut&) const = default;
};

// Identifies a block by its origin.
struct BlockRef {
  std::string sentence_id;
  std::size_t triple_index = 0;
  Role role = Role::head;

  auto operator<=>(const BlockRef&) const = default;
};

struct GroupKey {
  Role role = Role::head;
  std::string relation;
  // Entity tag for head/tail groups. Relation groups carry the
  // "head_tag|tail_tag" signature of the owning triple here instead, so a
  // relation span is only ever swapped between structurally compatible
  // triples.
  std::string entity_tag;

  auto operator<=>(const GroupKey&) const = default;
};

std::string to_string(const GroupKey& key);

struct TextBlock {
  std::string span_text;
  Role role = Role::head;
  // Entity tag for head/tail blocks, relation name for relation blocks.
  std::string label_tag;
  // `left_context` tokens before the cut followed by the tokens after it.
  std::vector<std::string> context_tokens;
  std::size_t left_context = 0;
  Cut cut;
  std::string source_sentence;
  std::size_t source_triple = 0;
  // Relation of the owning triple.
  std::string relation;
  GroupKey group;

  BlockRef ref() const { return BlockRef{source_sentence, source_triple, role}; }
  bool operator==(const TextBlock&) const = default;
};

struct EncodeResult {
  std::vector<TextBlock> blocks;
  std::vector<std::string> skipped;  // one entry per degenerate triple
};

inline constexpr std::size_t kDefaultContextWidth = 3;

EncodeResult encode(const Sentence& sentence, const std::vector<Triple>& triples,
                    std::size_t context_width = kDefaultContextWidth,
                    SplitMode mode = SplitMode::labeled);

EncodeResult encode_dataset(const Dataset& dataset, std::size_t context_width = kDefaultContextWidth,
                            SplitMode mode = SplitMode::labeled);

// Reassembles the sentence text from the block spans and the sentence's
// uncovered material, after checking every block against the sentence.
std::string reconstruct(const Sentence& sentence, const std::vector<TextBlock>& blocks);

using BlockLibrary = std::map<GroupKey, std::vector<TextBlock>>;

// Partition blocks by their group key. In labeled mode, entity tags and
// relations are checked against the schema.
BlockLibrary group_blocks(const std::vector<TextBlock>& blocks, const RelationSchema& schema);

}  // namespace ssdau

namespace ssdau {

// Sentences addressable by id; blocks refer back to them.
using SentenceIndex = std::map<std::string, Sentence, std::less<>>;

SentenceIndex index_sentences(const Dataset& dataset);

}  // namespace ssdau
