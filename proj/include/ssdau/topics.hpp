#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ssdau/corpus.hpp"
#include "ssdau/embedding.hpp"

namespace ssdau {

struct TopicModel {
  std::size_t k_topics = 0;
  // Means of unit-normalized pooled sentence vectors.
  std::vector<EmbeddingVector> centroids;
  // Per topic, terms ranked by class-based TF-IDF score (descending, then term).
  std::vector<std::vector<std::pair<std::string, double>>> topic_terms;
  std::map<std::string, std::size_t> assignments;
};

struct TopicOptions {
  std::size_t k_topics = 8;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 100;
  std::size_t top_terms = 10;
  std::size_t threads = 1;
};

// Seeded k-means (k-means++ seeding, Lloyd iterations) over unit-normalized
// pooled sentence vectors, then class-based TF-IDF over content words:
// score(t, c) = tf(t, c) / |c| * log(1 + A / f(t)), A the mean class size in
// words and f(t) the corpus frequency of t.
TopicModel fit_topics(const std::vector<Sentence>& sentences, const EmbeddingProvider& provider,
                      const TopicOptions& options);

EmbeddingVector normalized_pooled(const EmbeddingProvider& provider, const Sentence& sentence);

// Nearest centroid by Euclidean distance; ties go to the lower index.
std::size_t nearest_topic(const TopicModel& model, const EmbeddingVector& unit_vector);

// Topic of the source: its fitted assignment when modeled, else its nearest
// centroid. The candidate is kept when its nearest centroid is that topic or
// when (cos(candidate, centroid) + 1) / 2 >= min_affinity.
bool topic_filter(const TopicModel& model, const EmbeddingProvider& provider, const Sentence& source,
                  const Sentence& candidate, double min_affinity);

}  // namespace ssdau
