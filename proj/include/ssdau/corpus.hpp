#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ssdau {

struct Token {
  std::string surface;
  std::size_t char_start = 0;  // byte offsets into Sentence::text
  std::size_t char_end = 0;

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::string id;
  std::string text;
  std::vector<Token> tokens;

  bool operator==(const Sentence&) const = default;
};

// Token range [token_start, token_end) plus the covered surface.
struct EntityMention {
  std::size_t token_start = 0;
  std::size_t token_end = 0;
  std::string surface;
  std::string tag;

  std::size_t length() const { return token_end - token_start; }
  bool operator==(const EntityMention&) const = default;
};

struct Triple {
  EntityMention head;
  std::string relation;
  EntityMention tail;

  bool operator==(const Triple&) const = default;
};

struct Instance {
  Sentence sentence;
  std::vector<Triple> triples;

  bool operator==(const Instance&) const = default;
};

using Dataset = std::vector<Instance>;

class RelationSchema {
 public:
  RelationSchema() = default;
  RelationSchema(std::vector<std::string> relations, std::set<std::string> entity_tags);

  // Build from every relation and tag observed in a dataset, relations in
  // first-seen order.
  static RelationSchema from_dataset(const Dataset& dataset);

  std::size_t size() const { return relations_.size(); }
  const std::vector<std::string>& relations() const { return relations_; }
  const std::set<std::string>& entity_tags() const { return entity_tags_; }
  std::optional<std::size_t> index_of(std::string_view relation) const;
  // Throws ErrorKind::schema for unknown names.
  std::size_t require(std::string_view relation) const;
  bool has_tag(const std::string& tag) const { return entity_tags_.count(tag) != 0; }

 private:
  std::vector<std::string> relations_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::set<std::string> entity_tags_;
};

// Whitespace-plus-punctuation tokenizer. Tokens are maximal runs of
// alphanumeric (or non-ASCII) bytes, or a single ASCII punctuation byte.
std::vector<Token> tokenize(std::string_view text);
Sentence make_sentence(std::string id, std::string text);

// Text covered by tokens [start, end); empty for an empty range.
std::string span_text(const Sentence& s, std::size_t token_start, std::size_t token_end);
// Byte range covered by tokens [start, end). For an empty range the
// position is the boundary after token start-1.
std::pair<std::size_t, std::size_t> char_range(const Sentence& s, std::size_t token_start,
                                               std::size_t token_end);

// Checks the token, mention, and surface invariants; throws on violation.
void validate_instance(const Instance& inst, std::size_t max_tokens);

enum class InputFormat { jsonl, nyt_json, webnlg_json };
enum class UnknownRelationPolicy { fail, skip };

struct LoadOptions {
  std::size_t max_tokens = 128;
  UnknownRelationPolicy unknown_relations = UnknownRelationPolicy::fail;
  // When empty the schema is taken from the file itself.
  std::optional<RelationSchema> schema;
};

struct LoadReport {
  std::size_t records = 0;
  std::size_t sentences = 0;
  std::size_t triples = 0;
  std::size_t rejected_too_long = 0;
  std::size_t skipped_triples = 0;
  std::size_t first_match_resolutions = 0;
  std::set<std::string> unknown_relations;
  std::vector<std::string> warnings;
};

struct LoadResult {
  Dataset dataset;
  LoadReport report;
};

std::optional<InputFormat> parse_input_format(std::string_view name);
const char* to_string(InputFormat format);

LoadResult load_dataset(const std::string& path, InputFormat format, const LoadOptions& options = {});
LoadResult parse_dataset(std::string_view contents, InputFormat format, const LoadOptions& options = {});

// One JSON object per line, keys sorted.
std::string dataset_to_jsonl(const Dataset& dataset);
void save_dataset(const std::string& path, const Dataset& dataset);

// Appends round(rate * |dataset|) instances drawn from `foreign` after the
// untouched originals. Draws are without replacement while the pool lasts.
Dataset inject_perturbation(const Dataset& dataset, const Dataset& foreign, double rate,
                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sparse stand-in for the n x K x n tag tensor. One entry per triple at
// (head start token, relation index, tail start token); the tag id encodes
// the (head length, tail length) pair. Tag 0 is the null tag.

struct TagEntry {
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;
  std::size_t tag = 0;

  auto operator<=>(const TagEntry&) const = default;
};

struct TagAssignment {
  std::size_t n = 0;  // token count
  std::size_t k = 0;  // relation count
  std::size_t tag_vocab_size = 0;
  std::vector<TagEntry> entries;  // sorted, unique cells
};

// Square-shell enumeration of (head_len, tail_len) pairs: a vocabulary of
// size 1 + L*L covers every pair with both lengths <= L.
std::size_t encode_span_lengths(std::size_t head_len, std::size_t tail_len);
std::pair<std::size_t, std::size_t> decode_span_lengths(std::size_t tag);
std::size_t tag_vocab_for_max_span(std::size_t max_span_length);

TagAssignment triples_to_tags(const Sentence& sentence, const std::vector<Triple>& triples,
                              const RelationSchema& schema, std::size_t tag_vocab_size);
// Entity tags are not part of the tensor; recovered mentions carry an empty tag.
std::vector<Triple> tags_to_triples(const Sentence& sentence, const TagAssignment& tags,
                                    const RelationSchema& schema);

}  // namespace ssdau
