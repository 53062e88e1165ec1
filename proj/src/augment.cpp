#include "ssdau/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ssdau/error.hpp"

namespace ssdau {

const char* to_string(AugmentMode mode) {
  switch (mode) {
    case AugmentMode::coordinated_hrt: return "hrt";
    case AugmentMode::head_only: return "h";
    case AugmentMode::tail_only: return "t";
    case AugmentMode::relation_only: return "r";
    case AugmentMode::ht_only: return "ht";
    case AugmentMode::hrh: return "hrh";
    case AugmentMode::trt: return "trt";
  }
  return "?";
}

std::optional<AugmentMode> parse_augment_mode(std::string_view name) {
  if (name == "hrt" || name == "coordinated_hrt") return AugmentMode::coordinated_hrt;
  if (name == "h" || name == "head_only") return AugmentMode::head_only;
  if (name == "t" || name == "tail_only") return AugmentMode::tail_only;
  if (name == "r" || name == "relation_only") return AugmentMode::relation_only;
  if (name == "ht" || name == "ht_only") return AugmentMode::ht_only;
  if (name == "hrh") return AugmentMode::hrh;
  if (name == "trt") return AugmentMode::trt;
  return std::nullopt;
}

double AugmentPolicy::threshold_for(Role role) const {
  if (role == Role::relation) return epsilon_relation.value_or(epsilon);
  return epsilon_entity.value_or(epsilon);
}

void AugmentPolicy::validate() const {
  for (const std::optional<double>& v : {std::optional<double>(epsilon), epsilon_entity, epsilon_relation}) {
    if (v && !(*v >= 0.0)) throw Error(ErrorKind::config, "similarity thresholds must be >= 0");
  }
}

const char* to_string(DiscardReason reason) {
  switch (reason) {
    case DiscardReason::none: return "none";
    case DiscardReason::empty_replacement: return "empty_replacement";
    case DiscardReason::empty_span: return "empty_span";
    case DiscardReason::clobbered_mention: return "clobbered_mention";
    case DiscardReason::misaligned: return "misaligned";
    case DiscardReason::overlapping_spans: return "overlapping_spans";
    case DiscardReason::identity: return "identity";
    case DiscardReason::duplicate: return "duplicate";
  }
  return "?";
}

ReplacementStep step_from(const MatchCandidate& c) {
  return ReplacementStep{c.source.role, c.source.source_triple, c.replacement.span_text,
                         c.replacement.relation, c.hybrid, c.replacement.ref()};
}

// ---------------------------------------------------------------------------

namespace {

struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct Edit {
  CharSpan range;
  std::string text;
};

std::optional<std::size_t> token_at_start(const std::vector<Token>& tokens, std::size_t pos) {
  auto it = std::lower_bound(tokens.begin(), tokens.end(), pos,
                             [](const Token& t, std::size_t p) { return t.char_start < p; });
  if (it == tokens.end() || it->char_start != pos) return std::nullopt;
  return static_cast<std::size_t>(it - tokens.begin());
}

std::optional<std::size_t> token_at_end(const std::vector<Token>& tokens, std::size_t pos) {
  auto it = std::lower_bound(tokens.begin(), tokens.end(), pos,
                             [](const Token& t, std::size_t p) { return t.char_end < p; });
  if (it == tokens.end() || it->char_end != pos) return std::nullopt;
  return static_cast<std::size_t>(it - tokens.begin());
}

class EditState {
 public:
  EditState(Sentence s, std::vector<Triple> t) : sentence_(std::move(s)), triples_(std::move(t)) {}

  DiscardReason apply(const ReplacementStep& step) {
    if (step.triple_index >= triples_.size()) return DiscardReason::empty_span;
    if (step.surface.empty()) return DiscardReason::empty_replacement;
    if (step.role == Role::relation) return apply_relation(step);
    return apply_entity(step);
  }

  Sentence& sentence() { return sentence_; }
  std::vector<Triple>& triples() { return triples_; }

 private:
  CharSpan chars(const EntityMention& m) const {
    return {sentence_.tokens[m.token_start].char_start, sentence_.tokens[m.token_end - 1].char_end};
  }

  std::vector<EntityMention*> mentions() {
    std::vector<EntityMention*> out;
    for (auto& t : triples_) {
      out.push_back(&t.head);
      out.push_back(&t.tail);
    }
    return out;
  }

  DiscardReason apply_entity(const ReplacementStep& step) {
    const Triple& owner = triples_[step.triple_index];
    const EntityMention source = step.role == Role::head ? owner.head : owner.tail;
    const std::size_t len = source.length();
    const auto& toks = sentence_.tokens;
    auto all = mentions();
    std::vector<Edit> edits;
    for (std::size_t p = 0; p + len <= toks.size(); ++p) {
      bool same = true;
      for (std::size_t k = 0; k < len && same; ++k) {
        same = toks[p + k].surface == toks[source.token_start + k].surface;
      }
      if (!same || span_text(sentence_, p, p + len) != source.surface) continue;
      bool exact = false, overlaps = false;
      for (const EntityMention* m : all) {
        if (m->token_start == p && m->token_end == p + len) {
          exact = true;
        } else if (m->token_start < p + len && p < m->token_end) {
          overlaps = true;
        }
      }
      // Occurrences nested in a different mention are left alone.
      if (overlaps && !exact) continue;
      const CharSpan range{toks[p].char_start, toks[p + len - 1].char_end};
      edits.push_back(Edit{range, step.surface});
      p += len - 1;
    }
    return rebuild(edits);
  }

  DiscardReason apply_relation(const ReplacementStep& step) {
    Triple& owner = triples_[step.triple_index];
    const bool head_first = owner.head.token_end <= owner.tail.token_start;
    const std::size_t a = head_first ? owner.head.token_end : owner.tail.token_end;
    const std::size_t b = head_first ? owner.tail.token_start : owner.head.token_start;
    if (a >= b) return DiscardReason::empty_span;
    for (const EntityMention* m : mentions()) {
      if (m->token_start < b && a < m->token_end) return DiscardReason::clobbered_mention;
    }
    const CharSpan range{sentence_.tokens[a].char_start, sentence_.tokens[b - 1].char_end};
    const auto reason = rebuild({Edit{range, step.surface}});
    if (reason == DiscardReason::none) triples_[step.triple_index].relation = step.relation;
    return reason;
  }

  DiscardReason rebuild(std::vector<Edit> edits) {
    std::sort(edits.begin(), edits.end(),
              [](const Edit& x, const Edit& y) { return x.range.begin < y.range.begin; });
    std::string text;
    text.reserve(sentence_.text.size() + 16);
    std::size_t pos = 0;
    std::vector<std::pair<CharSpan, CharSpan>> moved;  // old range -> new range
    for (const auto& e : edits) {
      text.append(sentence_.text, pos, e.range.begin - pos);
      const std::size_t start = text.size();
      text += e.text;
      moved.push_back({e.range, CharSpan{start, text.size()}});
      pos = e.range.end;
    }
    text.append(sentence_.text, pos, std::string::npos);

    auto remap = [&](CharSpan old) -> std::optional<CharSpan> {
      std::ptrdiff_t delta = 0;
      for (const auto& [from, to] : moved) {
        if (from.begin == old.begin && from.end == old.end) return to;
        if (from.begin < old.end && old.begin < from.end) return std::nullopt;
        if (from.end <= old.begin) {
          delta += static_cast<std::ptrdiff_t>(to.end - to.begin) -
                   static_cast<std::ptrdiff_t>(from.end - from.begin);
        }
      }
      return CharSpan{static_cast<std::size_t>(static_cast<std::ptrdiff_t>(old.begin) + delta),
                      static_cast<std::size_t>(static_cast<std::ptrdiff_t>(old.end) + delta)};
    };

    std::vector<CharSpan> spans;
    for (EntityMention* m : mentions()) {
      auto r = remap(chars(*m));
      if (!r) return DiscardReason::clobbered_mention;
      spans.push_back(*r);
    }
    Sentence rebuilt{sentence_.id, std::move(text), {}};
    rebuilt.tokens = tokenize(rebuilt.text);
    std::size_t i = 0;
    std::vector<EntityMention> updated;
    for (EntityMention* m : mentions()) {
      const CharSpan r = spans[i++];
      auto ts = token_at_start(rebuilt.tokens, r.begin);
      auto te = token_at_end(rebuilt.tokens, r.end);
      if (!ts || !te || *te < *ts) return DiscardReason::misaligned;
      updated.push_back(EntityMention{*ts, *te + 1, rebuilt.text.substr(r.begin, r.end - r.begin), m->tag});
    }
    i = 0;
    for (EntityMention* m : mentions()) *m = updated[i++];
    sentence_ = std::move(rebuilt);
    return DiscardReason::none;
  }

  Sentence sentence_;
  std::vector<Triple> triples_;
};

}  // namespace

ReplacementResult apply_steps(const Sentence& sentence, const std::vector<Triple>& triples,
                              const std::vector<ReplacementStep>& steps, AugmentMode mode) {
  EditState state(sentence, triples);
  for (const auto& step : steps) {
    if (auto reason = state.apply(step); reason != DiscardReason::none) return {std::nullopt, reason};
  }
  for (const auto& t : state.triples()) {
    if (t.head.token_start < t.tail.token_end && t.tail.token_start < t.head.token_end) {
      return {std::nullopt, DiscardReason::overlapping_spans};
    }
  }
  AugmentedInstance inst;
  inst.sentence = std::move(state.sentence());
  inst.triples = std::move(state.triples());
  inst.provenance.source_id = sentence.id;
  inst.provenance.mode = mode;
  for (const auto& step : steps) {
    inst.provenance.replaced_roles.push_back(step.role);
    inst.provenance.triple_indices.push_back(step.triple_index);
    inst.provenance.theta.push_back(step.theta);
    inst.provenance.replacement_sources.push_back(step.replacement_source);
  }
  return {std::move(inst), DiscardReason::none};
}

ReplacementResult apply_replacement(const Sentence& sentence, const std::vector<Triple>& triples,
                                    const MatchCandidate& candidate) {
  if (candidate.source.source_sentence != sentence.id) {
    throw Error(ErrorKind::config, "candidate source block is not from sentence " + sentence.id);
  }
  AugmentMode mode = candidate.source.role == Role::head       ? AugmentMode::head_only
                     : candidate.source.role == Role::relation ? AugmentMode::relation_only
                                                               : AugmentMode::tail_only;
  return apply_steps(sentence, triples, {step_from(candidate)}, mode);
}

// ---------------------------------------------------------------------------

ComboStream::ComboStream(std::vector<std::vector<double>> scores) : scores_(std::move(scores)) {
  for (std::size_t l = 0; l < scores_.size(); ++l) {
    for (std::size_t r = 0; r < scores_[l].size(); ++r) merged_.push_back(Entry{scores_[l][r], l, r});
  }
  std::sort(merged_.begin(), merged_.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.list != b.list) return a.list < b.list;
    return a.rank < b.rank;
  });
  seen_.assign(scores_.size(), 0);
}

void ComboStream::prime() {
  primed_ = true;
  pending_.reset();
  const std::size_t m = scores_.size();
  if (m == 0) return;
  while (key_ < merged_.size()) {
    const Entry& e = merged_[key_];
    if (!in_key_) {
      limits_ = seen_;
      bool ok = true;
      for (std::size_t l = 0; l < m; ++l) ok = ok && (l == e.list || limits_[l] > 0);
      if (ok) {
        odometer_.assign(m, 0);
        odometer_[e.list] = e.rank;
        in_key_ = true;
        pending_ = odometer_;
        return;
      }
    } else {
      for (std::size_t l = m; l-- > 0;) {
        if (l == e.list) continue;
        if (++odometer_[l] < limits_[l]) {
          pending_ = odometer_;
          return;
        }
        odometer_[l] = 0;
      }
    }
    in_key_ = false;
    ++seen_[e.list];
    ++key_;
  }
}

double ComboStream::peek_score() {
  if (!primed_) prime();
  if (!pending_) return -std::numeric_limits<double>::infinity();
  return merged_[key_].score;
}

std::optional<std::vector<std::size_t>> ComboStream::next() {
  if (!primed_) prime();
  auto out = std::move(pending_);
  if (out) prime();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

using CandidateIndex = std::map<BlockRef, std::vector<const MatchCandidate*>>;

CandidateIndex index_candidates(const QueueMap& queues, const AugmentPolicy& policy) {
  CandidateIndex index;
  for (const auto& [key, queue] : queues) {
    for (const auto& c : queue.entries) {
      if (c.hybrid >= policy.threshold_for(c.source.role)) index[c.source.ref()].push_back(&c);
    }
  }
  for (auto& [ref, list] : index) {
    std::stable_sort(list.begin(), list.end(), [](const MatchCandidate* a, const MatchCandidate* b) {
      return candidate_before(*a, *b);
    });
  }
  return index;
}

// A stream of step combinations for one choice of source blocks.
struct ProposalStream {
  std::vector<const std::vector<const MatchCandidate*>*> lists;
  std::unique_ptr<ComboStream> combos;
};

ProposalStream make_stream(std::vector<const std::vector<const MatchCandidate*>*> lists) {
  std::vector<std::vector<double>> scores;
  for (const auto* l : lists) {
    std::vector<double> s;
    for (const auto* c : *l) s.push_back(c->hybrid);
    scores.push_back(std::move(s));
  }
  return ProposalStream{std::move(lists), std::make_unique<ComboStream>(std::move(scores))};
}

std::vector<ProposalStream> streams_for(const Instance& inst, const CandidateIndex& index,
                                        AugmentMode mode) {
  static const std::vector<const MatchCandidate*> kNone;
  auto lookup = [&](std::size_t triple, Role role) -> const std::vector<const MatchCandidate*>* {
    auto it = index.find(BlockRef{inst.sentence.id, triple, role});
    return it == index.end() ? &kNone : &it->second;
  };
  std::vector<ProposalStream> streams;
  const std::size_t n = inst.triples.size();
  for (std::size_t j = 0; j < n; ++j) {
    switch (mode) {
      case AugmentMode::head_only:
        streams.push_back(make_stream({lookup(j, Role::head)}));
        break;
      case AugmentMode::tail_only:
        streams.push_back(make_stream({lookup(j, Role::tail)}));
        break;
      case AugmentMode::relation_only:
        streams.push_back(make_stream({lookup(j, Role::relation)}));
        break;
      case AugmentMode::ht_only:
        streams.push_back(make_stream({lookup(j, Role::head), lookup(j, Role::tail)}));
        break;
      case AugmentMode::coordinated_hrt:
        streams.push_back(make_stream(
            {lookup(j, Role::head), lookup(j, Role::relation), lookup(j, Role::tail)}));
        break;
      case AugmentMode::hrh:
      case AugmentMode::trt: {
        const Role role = mode == AugmentMode::hrh ? Role::head : Role::tail;
        auto surface = [&](std::size_t t) {
          return role == Role::head ? inst.triples[t].head.surface : inst.triples[t].tail.surface;
        };
        for (std::size_t k = 0; k < n; ++k) {
          if (k == j || surface(k) == surface(j)) continue;
          streams.push_back(make_stream({lookup(j, role), lookup(j, Role::relation), lookup(k, role)}));
        }
        break;
      }
    }
  }
  return streams;
}

constexpr std::size_t kMaxProposalsPerSentence = 100000;

}  // namespace

std::vector<AugmentedInstance> augment_dataset(const Dataset& dataset, const QueueMap& queues,
                                               const AugmentPolicy& policy, AugmentStats* stats) {
  policy.validate();
  AugmentStats local;
  AugmentStats& st = stats ? *stats : local;
  const CandidateIndex index = index_candidates(queues, policy);

  std::vector<const Instance*> order;
  for (const auto& inst : dataset) order.push_back(&inst);
  std::stable_sort(order.begin(), order.end(), [](const Instance* a, const Instance* b) {
    return a->sentence.id < b->sentence.id;
  });

  std::vector<AugmentedInstance> out;
  for (const Instance* inst : order) {
    if (policy.max_per_sentence == 0) break;
    auto streams = streams_for(*inst, index, policy.mode);
    std::set<std::string> produced_keys;
    std::size_t produced = 0, examined = 0;
    while (produced < policy.max_per_sentence && examined < kMaxProposalsPerSentence) {
      // Highest-scoring next proposal across streams; ties go to the earlier stream.
      std::size_t best = streams.size();
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < streams.size(); ++s) {
        const double score = streams[s].combos->peek_score();
        if (score > best_score) {
          best_score = score;
          best = s;
        }
      }
      if (best == streams.size()) break;
      auto ranks = *streams[best].combos->next();
      ++examined;
      ++st.proposals;
      std::vector<ReplacementStep> steps;
      for (std::size_t l = 0; l < ranks.size(); ++l) {
        steps.push_back(step_from(*(*streams[best].lists[l])[ranks[l]]));
      }
      auto result = apply_steps(inst->sentence, inst->triples, steps, policy.mode);
      if (result.instance && result.instance->sentence.text == inst->sentence.text) {
        result = {std::nullopt, DiscardReason::identity};
      }
      if (result.instance) {
        std::string key = result.instance->sentence.text;
        for (const auto& t : result.instance->triples) key += "\x1f" + t.relation;
        if (!produced_keys.insert(key).second) result = {std::nullopt, DiscardReason::duplicate};
      }
      if (!result.instance) {
        ++st.discarded[to_string(result.reason)];
        continue;
      }
      result.instance->sentence.id = inst->sentence.id + "~aug" + std::to_string(produced);
      out.push_back(std::move(*result.instance));
      ++produced;
      ++st.produced;
    }
  }
  return out;
}

CoherenceReport coherence_score(const Sentence& source, const Sentence& candidate) {
  CoherenceReport r;
  r.source_pattern = pos_pattern(source.tokens);
  r.candidate_pattern = pos_pattern(candidate.tokens);
  r.nu = pattern_similarity(r.source_pattern, r.candidate_pattern);
  return r;
}

}  // namespace ssdau
