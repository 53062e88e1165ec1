#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssdau/discretize.hpp"
#include "ssdau/embedding.hpp"
#include "ssdau/pos.hpp"

namespace ssdau {

struct SimilarityWeights {
  double semantic = 1.0;
  double syntactic = 1.0;
  double lexical = 1.0;
  double context = 1.0;
  double contextual_embedding = 1.0;

  double sum() const { return semantic + syntactic + lexical + context + contextual_embedding; }
  // Throws on negative or all-zero weights.
  void validate() const;
  // "w1,w2,w3,w4,w5" in the field order above.
  static SimilarityWeights parse(std::string_view text);
};

// Every component lies in [0, 1].
struct ComponentScores {
  double semantic = 0.0;
  double syntactic = 0.0;
  double lexical = 0.0;
  double context = 0.0;
  double contextual_embedding = 0.0;

  bool operator==(const ComponentScores&) const = default;
};

// Weighted mean of the components, in [0, 1].
double hybrid_score(const ComponentScores& c, const SimilarityWeights& w);

enum class RejectReason { none, empty_span, role_mismatch, group_mismatch };
const char* to_string(RejectReason reason);

struct ScoreOutcome {
  std::optional<ComponentScores> scores;
  RejectReason reason = RejectReason::none;
};

struct MatchCandidate {
  TextBlock source;
  TextBlock replacement;
  ComponentScores components;
  double hybrid = 0.0;
};

// Total order used everywhere candidates are ranked: hybrid descending, then
// source ref, then replacement ref.
bool candidate_before(const MatchCandidate& a, const MatchCandidate& b);

struct CandidateQueue {
  GroupKey group;
  std::vector<MatchCandidate> entries;
};

using QueueMap = std::map<GroupKey, CandidateQueue>;

// Per-block features shared by every pair the block takes part in.
struct BlockFeatures {
  std::vector<std::string> span_terms;     // lowercased, sorted, unique
  std::vector<std::string> context_terms;  // lowercased, sorted, unique
  std::vector<Pos> pattern;
  EmbeddingVector semantic;    // span embedded on its own
  EmbeddingVector contextual;  // span pooled inside its sentence
  bool empty = false;
};

// Computes and caches block features against one provider.
class BlockFeaturizer {
 public:
  BlockFeaturizer(const EmbeddingProvider& provider, const SentenceIndex& sentences);

  BlockFeatures features(const TextBlock& block);

 private:
  EmbeddingMemo memo_;
  const SentenceIndex& sentences_;
};

// lexical = Jaccard of span terms, context = Jaccard of context terms,
// syntactic = POS pattern edit similarity, semantic and contextual =
// (cosine + 1) / 2 of the respective vectors.
ComponentScores component_scores(const BlockFeatures& a, const BlockFeatures& b);
ScoreOutcome component_scores(const TextBlock& a, const TextBlock& b, BlockFeaturizer& featurizer);

struct MatchOptions {
  SimilarityWeights weights;
  double floor = 0.0;
  std::size_t per_group_cap = 5000;
  std::size_t threads = 1;
};

// All ordered pairs (a, b), a != b, within each group with differing
// surfaces, non-empty spans and hybrid >= floor, sorted by candidate_before
// and truncated to the per-group cap.
QueueMap build_queues(const BlockLibrary& library, const SentenceIndex& sentences,
                      const EmbeddingProvider& provider, const MatchOptions& options);

std::size_t total_candidates(const QueueMap& queues);

}  // namespace ssdau
