#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssdau/corpus.hpp"
#include "ssdau/discretize.hpp"
#include "ssdau/matching.hpp"
#include "ssdau/pos.hpp"

namespace ssdau {

// Which spans a proposal replaces. hrh/trt additionally replace the head
// (tail) of a second triple in the same sentence.
enum class AugmentMode { coordinated_hrt, head_only, tail_only, relation_only, ht_only, hrh, trt };

const char* to_string(AugmentMode mode);
std::optional<AugmentMode> parse_augment_mode(std::string_view name);

struct AugmentPolicy {
  AugmentMode mode = AugmentMode::coordinated_hrt;
  double epsilon = 0.7;
  std::optional<double> epsilon_entity;
  std::optional<double> epsilon_relation;
  std::size_t max_per_sentence = 3;

  double threshold_for(Role role) const;
  // Thresholds above 1 are allowed and simply unsatisfiable.
  void validate() const;
};

// One replacement step: the span of `role` in triple `triple_index` becomes
// `surface`. For relation steps the triple's relation becomes `relation`.
struct ReplacementStep {
  Role role = Role::head;
  std::size_t triple_index = 0;
  std::string surface;
  std::string relation;
  double theta = 0.0;
  BlockRef replacement_source;
};

ReplacementStep step_from(const MatchCandidate& candidate);

struct Provenance {
  std::string source_id;
  AugmentMode mode = AugmentMode::head_only;
  std::vector<Role> replaced_roles;
  std::vector<std::size_t> triple_indices;
  std::vector<double> theta;
  std::vector<BlockRef> replacement_sources;

  bool operator==(const Provenance&) const = default;
};

struct AugmentedInstance {
  Sentence sentence;
  std::vector<Triple> triples;
  Provenance provenance;

  Instance as_instance() const { return Instance{sentence, triples}; }
};

enum class DiscardReason {
  none,
  empty_replacement,
  empty_span,
  clobbered_mention,  // an edit would cut through an entity mention
  misaligned,         // a remapped mention no longer lands on token boundaries
  overlapping_spans,  // a triple's head and tail now overlap
  identity,           // the rebuilt text equals the source
  duplicate,
};

const char* to_string(DiscardReason reason);

struct ReplacementResult {
  std::optional<AugmentedInstance> instance;
  DiscardReason reason = DiscardReason::none;
};

// Applies the steps in order, re-resolving spans after each. Entity steps
// rewrite every token-aligned occurrence of the replaced surface that is
// either an exact mention span or free of any mention, so all triples naming
// the entity stay consistent. Relation steps rewrite the tokens between the
// triple's head and tail.
ReplacementResult apply_steps(const Sentence& sentence, const std::vector<Triple>& triples,
                              const std::vector<ReplacementStep>& steps, AugmentMode mode);

// Single-candidate replacement. The candidate's source block must come from
// this sentence.
ReplacementResult apply_replacement(const Sentence& sentence, const std::vector<Triple>& triples,
                                    const MatchCandidate& candidate);

struct AugmentStats {
  std::size_t proposals = 0;
  std::size_t produced = 0;
  std::map<std::string, std::size_t> discarded;
};

// Output holds augmented instances only, ordered by (source id, rank).
std::vector<AugmentedInstance> augment_dataset(const Dataset& dataset, const QueueMap& queues,
                                               const AugmentPolicy& policy,
                                               AugmentStats* stats = nullptr);

struct CoherenceReport {
  double nu = 1.0;
  std::vector<Pos> source_pattern;
  std::vector<Pos> candidate_pattern;
};

CoherenceReport coherence_score(const Sentence& source, const Sentence& candidate);
inline CoherenceReport coherence_score(const Sentence& source, const AugmentedInstance& candidate) {
  return coherence_score(source, candidate.sentence);
}

inline constexpr double kDefaultCoherenceFloor = 0.5;

// ---------------------------------------------------------------------------
// Lazy enumeration of step combinations, exposed for tests.
//
// Each list is sorted best first. A combination's score is the minimum
// score of its members. Combinations come out ordered by their worst
// member's position in the merged order of all list entries (score
// descending, then list index, then rank), and then lexicographically by
// rank tuple.
class ComboStream {
 public:
  explicit ComboStream(std::vector<std::vector<double>> scores);

  // Returns the next rank tuple, or nothing when exhausted.
  std::optional<std::vector<std::size_t>> next();
  // Score of the combination next() would return; -inf when exhausted.
  double peek_score();

 private:
  void prime();

  std::vector<std::vector<double>> scores_;
  struct Entry {
    double score;
    std::size_t list;
    std::size_t rank;
  };
  std::vector<Entry> merged_;
  std::vector<std::size_t> seen_;  // per list: entries merged before key_
  std::size_t key_ = 0;
  bool in_key_ = false;
  bool primed_ = false;
  std::vector<std::size_t> limits_;
  std::vector<std::size_t> odometer_;
  std::optional<std::vector<std::size_t>> pending_;
};

}  // namespace ssdau
