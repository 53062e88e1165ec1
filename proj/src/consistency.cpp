#include "ssdau/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssdau/error.hpp"
#include "ssdau/parallel.hpp"
#include "ssdau/simd/kernels.hpp"

namespace ssdau {

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

double CellPredictor::log_prob(std::size_t i, std::size_t r, std::size_t j, std::size_t tag) const {
  std::vector<double> logits(tag_vocab_size());
  cell_logits(i, r, j, logits);
  return logits.at(tag) - log_sum_exp(logits);
}

LogitTable::LogitTable(std::size_t n, std::size_t k, std::size_t tag_vocab_size)
    : n_(n), k_(k), t_(tag_vocab_size), logits_(n * k * n * tag_vocab_size, 0.0) {
  if (tag_vocab_size < 2) throw Error(ErrorKind::config, "tag vocabulary needs a null and at least one tag");
}

void LogitTable::cell_logits(std::size_t i, std::size_t r, std::size_t j, std::span<double> out) const {
  const double* src = logits_.data() + ((i * k_ + r) * n_ + j) * t_;
  std::copy(src, src + t_, out.begin());
}

double& LogitTable::at(std::size_t i, std::size_t r, std::size_t j, std::size_t tag) {
  if (i >= n_ || j >= n_ || r >= k_ || tag >= t_) throw Error(ErrorKind::shape, "logit table index out of range");
  return logits_[((i * k_ + r) * n_ + j) * t_ + tag];
}

PairCellPredictor::PairCellPredictor(const PairScorer& scorer, const SentenceEmbedding& embedding,
                                     std::vector<double> tag_bias)
    : n_(embedding.per_token.size()), k_(scorer.relations), tag_bias_(std::move(tag_bias)) {
  scorer.check_shapes();
  if (tag_bias_.size() < 2) throw Error(ErrorKind::config, "tag vocabulary needs a null and at least one tag");
  tag_bias_[0] = 0.0;
  log_mass_ = log_sum_exp(std::span<const double>(tag_bias_).subspan(1));

  const std::size_t d = scorer.input_dim;
  const std::size_t h = scorer.hidden_dim;
  const std::size_t in = 2 * d;
  // W = [W_h | W_t]; head and tail halves are applied once per token.
  std::vector<double> w_head(h * d), w_tail(h * d);
  for (std::size_t a = 0; a < h; ++a) {
    std::copy_n(scorer.w.data() + a * in, d, w_head.data() + a * d);
    std::copy_n(scorer.w.data() + a * in + d, d, w_tail.data() + a * d);
  }
  std::vector<double> head_part(n_ * h), tail_part(n_ * h), x(d);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto& v = embedding.per_token[i];
    if (v.size() != d) throw Error(ErrorKind::shape, "token vector does not match scorer input dimension");
    std::copy(v.begin(), v.end(), x.begin());
    simd::gemv(w_head, h, d, x, std::span<double>(head_part.data() + i * h, h));
    simd::gemv(w_tail, h, d, x, std::span<double>(tail_part.data() + i * h, h));
  }
  scores_.assign(n_ * n_ * k_, 0.0);
  std::vector<double> e(h);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      for (std::size_t a = 0; a < h; ++a) {
        const double z = head_part[i * h + a] + tail_part[j * h + a] + scorer.bias[a];
        e[a] = z > 0.0 ? z : 0.0;
      }
      simd::gemv_t(scorer.r_rel, h, k_, e, std::span<double>(scores_.data() + (i * n_ + j) * k_, k_));
    }
  }
}

void PairCellPredictor::cell_logits(std::size_t i, std::size_t r, std::size_t j, std::span<double> out) const {
  const double v = scores_[(i * n_ + j) * k_ + r];
  out[0] = 0.0;
  for (std::size_t t = 1; t < tag_bias_.size(); ++t) out[t] = v + tag_bias_[t];
}

double PairCellPredictor::log_prob(std::size_t i, std::size_t r, std::size_t j, std::size_t tag) const {
  const double nl = null_log_prob(i, r, j);
  if (tag == 0) return nl;
  // log P(tau) = v + bias[tau] + log P(null)
  return scores_[(i * n_ + j) * k_ + r] + tag_bias_.at(tag) + nl;
}

double PairCellPredictor::null_log_prob(std::size_t i, std::size_t r, std::size_t j) const {
  return -softplus(scores_[(i * n_ + j) * k_ + r] + log_mass_);
}

std::vector<double> tag_log_prior(std::span<const TagAssignment> tags, std::size_t tag_vocab_size) {
  std::vector<double> counts(tag_vocab_size, 0.0);
  double cells = 0.0;
  for (const auto& t : tags) {
    cells += static_cast<double>(t.n * t.k * t.n);
    for (const auto& e : t.entries) {
      if (e.tag >= tag_vocab_size) throw Error(ErrorKind::shape, "tag outside vocabulary");
      counts[e.tag] += 1.0;
    }
  }
  double gold = 0.0;
  for (std::size_t t = 1; t < tag_vocab_size; ++t) gold += counts[t];
  const double null_count = cells - gold;
  std::vector<double> bias(tag_vocab_size, 0.0);
  for (std::size_t t = 1; t < tag_vocab_size; ++t) bias[t] = std::log((counts[t] + 1.0) / (null_count + 1.0));
  return bias;
}

double consistency_loss(const CellPredictor& p, const TagAssignment& tags) {
  if (tags.n != p.n() || tags.k != p.k() || tags.tag_vocab_size != p.tag_vocab_size()) {
    throw Error(ErrorKind::shape, "tag assignment does not match predictor grid");
  }
  const std::size_t n = tags.n, k = tags.k;
  if (n == 0 || k == 0) return 0.0;
  // Entries are sorted by (head, relation, tail), the same order as the
  // cell loop, so gold cells are picked off with a single cursor.
  double total = 0.0;
  auto gold = tags.entries.begin();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        if (gold != tags.entries.end() && gold->head == i && gold->relation == r && gold->tail == j) {
          total += p.log_prob(i, r, j, gold->tag);
          ++gold;
        } else {
          total += p.null_log_prob(i, r, j);
        }
      }
    }
  }
  if (gold != tags.entries.end()) throw Error(ErrorKind::shape, "tag entries unsorted or out of range");
  const double zeta = -total / static_cast<double>(n * k * n);
  return std::max(0.0, zeta);
}

double instance_zeta(const ZetaContext& ctx, const Sentence& sentence, const std::vector<Triple>& triples) {
  if (!ctx.scorer || !ctx.provider || !ctx.schema) throw Error(ErrorKind::config, "incomplete zeta context");
  const TagAssignment tags = triples_to_tags(sentence, triples, *ctx.schema, ctx.tag_vocab_size);
  if (tags.n == 0) return 0.0;
  std::vector<double> bias = ctx.tag_bias;
  if (bias.empty()) bias.assign(ctx.tag_vocab_size, 0.0);
  if (bias.size() != ctx.tag_vocab_size) throw Error(ErrorKind::shape, "tag bias does not match vocabulary");
  const PairCellPredictor predictor(*ctx.scorer, ctx.provider->embed(sentence), std::move(bias));
  return consistency_loss(predictor, tags);
}

std::vector<ConsistencyResult> rank_by_zeta(std::vector<ScoredId> scored, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw Error(ErrorKind::config, "keep fraction must lie in (0, 1]");
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.zeta != b.zeta) return a.zeta < b.zeta;
    return a.id < b.id;
  });
  const double want = keep_fraction * static_cast<double>(scored.size());
  // Guard against 0.3 * 10 landing a hair above 3.
  const auto keep = std::min(scored.size(), static_cast<std::size_t>(std::ceil(want - 1e-9)));
  std::vector<ConsistencyResult> out;
  out.reserve(scored.size());
  for (std::size_t r = 0; r < scored.size(); ++r) {
    out.push_back({std::move(scored[r].id), scored[r].zeta, r, r < keep});
  }
  return out;
}

std::vector<ConsistencyResult> filter_consistency(const std::vector<AugmentedInstance>& instances,
                                                  const ZetaContext& ctx, double keep_fraction,
                                                  std::size_t threads) {
  std::vector<ScoredId> scored(instances.size());
  parallel_for(instances.size(), threads, [&](std::size_t i) {
    scored[i] = {instances[i].sentence.id, instance_zeta(ctx, instances[i].sentence, instances[i].triples)};
  });
  return rank_by_zeta(std::move(scored), keep_fraction);
}

std::vector<PairExample> pair_examples(const Dataset& dataset, const EmbeddingProvider& provider,
                                       const RelationSchema& schema) {
  std::vector<PairExample> out;
  for (const auto& inst : dataset) {
    if (inst.triples.empty()) continue;
    const SentenceEmbedding emb = provider.embed(inst.sentence);
    for (const auto& t : inst.triples) {
      out.push_back({emb.per_token.at(t.head.token_start), emb.per_token.at(t.tail.token_start),
                     schema.require(t.relation)});
    }
  }
  return out;
}

}  // namespace ssdau
