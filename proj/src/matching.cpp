#include "ssdau/matching.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

#include "ssdau/error.hpp"
#include "ssdau/parallel.hpp"
#include "ssdau/simd/kernels.hpp"
#include "ssdau/util.hpp"

namespace ssdau {

void SimilarityWeights::validate() const {
  for (double w : {semantic, syntactic, lexical, context, contextual_embedding}) {
    if (!(w >= 0.0)) throw Error(ErrorKind::config, "similarity weights must be nonnegative");
  }
  if (!(sum() > 0.0)) throw Error(ErrorKind::config, "similarity weights sum to zero");
}

SimilarityWeights SimilarityWeights::parse(std::string_view text) {
  std::vector<double> values;
  std::stringstream ss{std::string(text)};
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::config, "bad weight value: " + item);
    }
  }
  if (values.size() != 5) throw Error(ErrorKind::config, "expected five comma-separated weights");
  SimilarityWeights w{values[0], values[1], values[2], values[3], values[4]};
  w.validate();
  return w;
}

double hybrid_score(const ComponentScores& c, const SimilarityWeights& w) {
  const double total = w.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::config, "similarity weights sum to zero");
  const double weighted = w.semantic * c.semantic + w.syntactic * c.syntactic +
                          w.lexical * c.lexical + w.context * c.context +
                          w.contextual_embedding * c.contextual_embedding;
  return std::clamp(weighted / total, 0.0, 1.0);
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::none: return "none";
    case RejectReason::empty_span: return "empty_span";
    case RejectReason::role_mismatch: return "role_mismatch";
    case RejectReason::group_mismatch: return "group_mismatch";
  }
  return "?";
}

bool candidate_before(const MatchCandidate& a, const MatchCandidate& b) {
  if (a.hybrid != b.hybrid) return a.hybrid > b.hybrid;
  const auto sa = a.source.ref(), sb = b.source.ref();
  if (sa != sb) return sa < sb;
  return a.replacement.ref() < b.replacement.ref();
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> term_set(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(to_lower(t));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Jaccard over sorted unique vectors.
double sorted_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double rescaled_cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return std::clamp((simd::cosine(a, b) + 1.0) / 2.0, 0.0, 1.0);
}

}  // namespace

BlockFeaturizer::BlockFeaturizer(const EmbeddingProvider& provider, const SentenceIndex& sentences)
    : memo_(provider), sentences_(sentences) {}

BlockFeatures BlockFeaturizer::features(const TextBlock& block) {
  BlockFeatures f;
  const auto span_tokens = tokenize(block.span_text);
  std::vector<std::string> surfaces;
  for (const auto& t : span_tokens) surfaces.push_back(t.surface);
  f.span_terms = term_set(surfaces);
  f.context_terms = term_set(block.context_tokens);
  f.pattern = pos_pattern(span_tokens);
  f.empty = block.cut.empty() || span_tokens.empty();
  if (f.empty) return f;
  f.semantic = memo_.provider().embed_sentence(block.span_text, span_tokens).pooled;
  auto it = sentences_.find(block.source_sentence);
  if (it == sentences_.end()) {
    throw Error(ErrorKind::config, "block refers to unknown sentence " + block.source_sentence);
  }
  f.contextual = embed_span(memo_.get(it->second), block.cut);
  return f;
}

ComponentScores component_scores(const BlockFeatures& a, const BlockFeatures& b) {
  ComponentScores c;
  c.lexical = sorted_jaccard(a.span_terms, b.span_terms);
  c.context = sorted_jaccard(a.context_terms, b.context_terms);
  c.syntactic = pattern_similarity(a.pattern, b.pattern);
  c.semantic = rescaled_cosine(a.semantic, b.semantic);
  c.contextual_embedding = rescaled_cosine(a.contextual, b.contextual);
  return c;
}

ScoreOutcome component_scores(const TextBlock& a, const TextBlock& b, BlockFeaturizer& featurizer) {
  if (a.role != b.role) return {std::nullopt, RejectReason::role_mismatch};
  if (a.group != b.group) return {std::nullopt, RejectReason::group_mismatch};
  if (a.cut.empty() || b.cut.empty() || a.span_text.empty() || b.span_text.empty()) {
    return {std::nullopt, RejectReason::empty_span};
  }
  return {component_scores(featurizer.features(a), featurizer.features(b)), RejectReason::none};
}

// ---------------------------------------------------------------------------

namespace {

struct PairScore {
  std::size_t source = 0;
  std::size_t replacement = 0;
  ComponentScores components;
  double hybrid = 0.0;
};

CandidateQueue score_group(const GroupKey& key, const std::vector<TextBlock>& blocks,
                           const std::vector<BlockFeatures>& features, const MatchOptions& options) {
  // Keeps the best `cap` pairs; with this comparator the heap top is the
  // worst pair kept so far.
  auto before = [&](const PairScore& a, const PairScore& b) {
    if (a.hybrid != b.hybrid) return a.hybrid > b.hybrid;
    const auto sa = blocks[a.source].ref(), sb = blocks[b.source].ref();
    if (sa != sb) return sa < sb;
    return blocks[a.replacement].ref() < blocks[b.replacement].ref();
  };
  std::priority_queue<PairScore, std::vector<PairScore>, decltype(before)> best(before);
  const std::size_t cap = options.per_group_cap;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (features[i].empty) continue;
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      if (i == j || features[j].empty || blocks[i].span_text == blocks[j].span_text) continue;
      PairScore p{i, j, component_scores(features[i], features[j]), 0.0};
      p.hybrid = hybrid_score(p.components, options.weights);
      if (p.hybrid < options.floor) continue;
      if (best.size() < cap) {
        best.push(p);
      } else if (cap > 0 && before(p, best.top())) {
        best.pop();
        best.push(p);
      }
    }
  }
  std::vector<PairScore> kept;
  kept.reserve(best.size());
  while (!best.empty()) {
    kept.push_back(best.top());
    best.pop();
  }
  std::reverse(kept.begin(), kept.end());
  CandidateQueue queue{key, {}};
  queue.entries.reserve(kept.size());
  for (const auto& p : kept) {
    queue.entries.push_back(
        MatchCandidate{blocks[p.source], blocks[p.replacement], p.components, p.hybrid});
  }
  return queue;
}

}  // namespace

QueueMap build_queues(const BlockLibrary& library, const SentenceIndex& sentences,
                      const EmbeddingProvider& provider, const MatchOptions& options) {
  options.weights.validate();
  if (!(options.floor >= 0.0 && options.floor <= 1.0)) {
    throw Error(ErrorKind::config, "similarity floor must lie in [0, 1]");
  }
  BlockFeaturizer featurizer(provider, sentences);
  std::vector<const GroupKey*> keys;
  std::vector<const std::vector<TextBlock>*> groups;
  for (const auto& [key, blocks] : library) {
    keys.push_back(&key);
    groups.push_back(&blocks);
  }
  std::vector<std::vector<BlockFeatures>> features(groups.size());
  parallel_for(groups.size(), options.threads, [&](std::size_t g) {
    features[g].reserve(groups[g]->size());
    for (const auto& b : *groups[g]) features[g].push_back(featurizer.features(b));
  });
  std::vector<CandidateQueue> queues(groups.size());
  parallel_for(groups.size(), options.threads, [&](std::size_t g) {
    queues[g] = score_group(*keys[g], *groups[g], features[g], options);
  });
  QueueMap out;
  for (std::size_t g = 0; g < groups.size(); ++g) out.emplace(*keys[g], std::move(queues[g]));
  return out;
}

std::size_t total_candidates(const QueueMap& queues) {
  std::size_t n = 0;
  for (const auto& [key, q] : queues) n += q.entries.size();
  return n;
}

}  // namespace ssdau
