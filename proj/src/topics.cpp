#include "ssdau/topics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ssdau/error.hpp"
#include "ssdau/parallel.hpp"
#include "ssdau/pos.hpp"
#include "ssdau/simd/kernels.hpp"
#include "ssdau/util.hpp"

namespace ssdau {

namespace {

double squared_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return sum;
}

bool content_word(const Token& t) {
  switch (tag_token(t.surface)) {
    case Pos::noun:
    case Pos::propn:
    case Pos::verb:
    case Pos::adj:
    case Pos::adv:
      return true;
    default:
      return false;
  }
}

std::size_t closest(const std::vector<EmbeddingVector>& centroids, const EmbeddingVector& v) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(v, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

EmbeddingVector normalized_pooled(const EmbeddingProvider& provider, const Sentence& sentence) {
  EmbeddingVector v = provider.embed(sentence).pooled;
  const double norm = std::sqrt(simd::dot(std::span<const float>(v), std::span<const float>(v)));
  if (norm > 0.0) {
    for (auto& x : v) x = static_cast<float>(x / norm);
  }
  return v;
}

std::size_t nearest_topic(const TopicModel& model, const EmbeddingVector& unit_vector) {
  if (model.centroids.empty()) throw Error(ErrorKind::model, "topic model has no centroids");
  return closest(model.centroids, unit_vector);
}

TopicModel fit_topics(const std::vector<Sentence>& sentences, const EmbeddingProvider& provider,
                      const TopicOptions& options) {
  if (options.k_topics < 1) throw Error(ErrorKind::config, "k_topics must be at least 1");
  if (sentences.size() < options.k_topics) {
    throw Error(ErrorKind::model, "fewer sentences (" + std::to_string(sentences.size()) + ") than topics (" +
                                      std::to_string(options.k_topics) + ")");
  }
  const std::size_t n = sentences.size();
  const std::size_t k = options.k_topics;
  std::vector<EmbeddingVector> points(n);
  parallel_for(n, options.threads, [&](std::size_t i) { points[i] = normalized_pooled(provider, sentences[i]); });

  // k-means++ seeding.
  Rng rng(options.seed);
  std::vector<EmbeddingVector> centroids;
  centroids.push_back(points[rng.below(n)]);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], squared_distance(points[i], centroids.back()));
      total += dist[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        target -= dist[pick];
        if (target < 0.0) break;
      }
    } else {
      pick = rng.below(n);
    }
    centroids.push_back(points[pick]);
  }

  std::vector<std::size_t> assign(n, k);
  const std::size_t dim = points.front().size();
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = closest(centroids, points[i]);
      if (c != assign[i]) {
        assign[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++sizes[assign[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        // Re-seed an empty cluster with the point farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = squared_distance(points[i], centroids[assign[i]]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centroids[c] = points[far];
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = static_cast<float>(sums[c][d] / sizes[c]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) assign[i] = closest(centroids, points[i]);

  TopicModel model;
  model.k_topics = k;
  model.centroids = std::move(centroids);
  for (std::size_t i = 0; i < n; ++i) model.assignments[sentences[i].id] = assign[i];

  // Class-based TF-IDF.
  std::vector<std::map<std::string, double>> tf(k);
  std::vector<double> class_words(k, 0.0);
  std::map<std::string, double> corpus_freq;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& t : sentences[i].tokens) {
      if (!content_word(t)) continue;
      const std::string term = to_lower(t.surface);
      tf[assign[i]][term] += 1.0;
      class_words[assign[i]] += 1.0;
      corpus_freq[term] += 1.0;
    }
  }
  double mean_words = 0.0;
  for (double w : class_words) mean_words += w;
  mean_words /= static_cast<double>(k);
  model.topic_terms.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    auto& terms = model.topic_terms[c];
    for (const auto& [term, count] : tf[c]) {
      const double score = count / class_words[c] * std::log(1.0 + mean_words / corpus_freq[term]);
      terms.emplace_back(term, score);
    }
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (terms.size() > options.top_terms) terms.resize(options.top_terms);
  }
  return model;
}

bool topic_filter(const TopicModel& model, const EmbeddingProvider& provider, const Sentence& source,
                  const Sentence& candidate, double min_affinity) {
  if (!(min_affinity >= 0.0 && min_affinity <= 1.0)) throw Error(ErrorKind::config, "min_affinity must lie in [0, 1]");
  std::size_t topic;
  if (auto it = model.assignments.find(source.id); it != model.assignments.end()) {
    topic = it->second;
  } else {
    topic = nearest_topic(model, normalized_pooled(provider, source));
  }
  const EmbeddingVector v = normalized_pooled(provider, candidate);
  if (nearest_topic(model, v) == topic) return true;
  const double affinity = (simd::cosine(std::span<const float>(v), std::span<const float>(model.centroids[topic])) + 1.0) / 2.0;
  return affinity >= min_affinity;
}

}  // namespace ssdau
