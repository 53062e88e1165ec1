#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssdau/augment.hpp"
#include "ssdau/corpus.hpp"
#include "ssdau/embedding.hpp"
#include "ssdau/scorer.hpp"

namespace ssdau {

// Per-cell tag distribution over an n x K x n grid. Implementations supply
// logits for the whole tag vocabulary; tag 0 is null.
class CellPredictor {
 public:
  virtual ~CellPredictor() = default;

  virtual std::size_t n() const = 0;
  virtual std::size_t k() const = 0;
  virtual std::size_t tag_vocab_size() const = 0;
  virtual void cell_logits(std::size_t i, std::size_t r, std::size_t j, std::span<double> out) const = 0;

  // log P(tag | cell). The default goes through cell_logits.
  virtual double log_prob(std::size_t i, std::size_t r, std::size_t j, std::size_t tag) const;
  virtual double null_log_prob(std::size_t i, std::size_t r, std::size_t j) const {
    return log_prob(i, r, j, 0);
  }
};

// Dense logit table, mainly for hand-set tests. Starts all zero (uniform).
class LogitTable final : public CellPredictor {
 public:
  LogitTable(std::size_t n, std::size_t k, std::size_t tag_vocab_size);

  std::size_t n() const override { return n_; }
  std::size_t k() const override { return k_; }
  std::size_t tag_vocab_size() const override { return t_; }
  void cell_logits(std::size_t i, std::size_t r, std::size_t j, std::span<double> out) const override;

  double& at(std::size_t i, std::size_t r, std::size_t j, std::size_t tag);

 private:
  std::size_t n_, k_, t_;
  std::vector<double> logits_;
};

// Tag predictor built on the pair scorer. For cell (i, r, j) the null tag
// has logit 0 and non-null tag tau has logit v_ij[r] + tag_bias[tau], where
// v_ij scores the token pair (i, j). The null log-probability then has the
// closed form -softplus(v_ij[r] + log sum_{tau>0} exp(tag_bias[tau])).
class PairCellPredictor final : public CellPredictor {
 public:
  PairCellPredictor(const PairScorer& scorer, const SentenceEmbedding& embedding,
                    std::vector<double> tag_bias);

  std::size_t n() const override { return n_; }
  std::size_t k() const override { return k_; }
  std::size_t tag_vocab_size() const override { return tag_bias_.size(); }
  void cell_logits(std::size_t i, std::size_t r, std::size_t j, std::span<double> out) const override;
  double log_prob(std::size_t i, std::size_t r, std::size_t j, std::size_t tag) const override;
  double null_log_prob(std::size_t i, std::size_t r, std::size_t j) const override;

 private:
  std::size_t n_, k_;
  std::vector<double> tag_bias_;
  double log_mass_ = 0.0;       // log sum over non-null tags of exp(bias)
  std::vector<double> scores_;  // n x n x K
};

// tag_bias[tau] = log((c_tau + 1) / (c_null + 1)) from gold counts over all
// cells of the given assignments; tag_bias[0] = 0.
std::vector<double> tag_log_prior(std::span<const TagAssignment> tags, std::size_t tag_vocab_size);

// zeta = -(1 / (n K n)) * sum over all cells of log P(gold tag). Computed
// from the sparse entries: every cell contributes its null log-probability
// and the gold cells are then corrected. Zero for an empty sentence.
double consistency_loss(const CellPredictor& predictor, const TagAssignment& tags);

struct ZetaContext {
  const PairScorer* scorer = nullptr;
  const EmbeddingProvider* provider = nullptr;
  const RelationSchema* schema = nullptr;
  std::size_t tag_vocab_size = 0;
  std::vector<double> tag_bias;  // empty means all zero
};

double instance_zeta(const ZetaContext& ctx, const Sentence& sentence, const std::vector<Triple>& triples);

struct ConsistencyResult {
  std::string id;
  double zeta = 0.0;
  std::size_t rank = 0;
  bool kept = false;
};

struct ScoredId {
  std::string id;
  double zeta = 0.0;
};

// Ranks ascending by (zeta, id) and keeps the first ceil(keep_fraction * n).
// Output is in rank order.
std::vector<ConsistencyResult> rank_by_zeta(std::vector<ScoredId> scored, double keep_fraction);

std::vector<ConsistencyResult> filter_consistency(const std::vector<AugmentedInstance>& instances,
                                                  const ZetaContext& ctx, double keep_fraction,
                                                  std::size_t threads = 1);

// Training pairs for the scorer: start-token vectors of each gold triple's
// head and tail.
std::vector<PairExample> pair_examples(const Dataset& dataset, const EmbeddingProvider& provider,
                                       const RelationSchema& schema);

}  // namespace ssdau
