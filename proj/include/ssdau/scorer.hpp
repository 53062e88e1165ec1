#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssdau/embedding.hpp"

namespace ssdau {

enum class InitKind { pretrained, random, zero, loaded };
const char* to_string(InitKind kind);

// Head-tail pair scorer:
//   e = relu(W [h; t] + b)            W: hidden x 2*input, b: hidden
//   v = R_rel^T dropout(e)            R_rel: hidden x relations
// Matrices are dense row-major.
struct PairScorer {
  std::size_t input_dim = 0;   // d
  std::size_t hidden_dim = 0;  // d_e
  std::size_t relations = 0;   // K
  std::vector<double> w;       // hidden_dim x (2 * input_dim)
  std::vector<double> bias;    // hidden_dim
  std::vector<double> r_rel;   // hidden_dim x relations
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;
  InitKind init = InitKind::zero;

  static PairScorer zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t relations);
  static PairScorer random(std::size_t input_dim, std::size_t hidden_dim, std::size_t relations,
                           std::uint64_t seed);

  // Throws ErrorKind::shape when the parameter sizes disagree.
  void check_shapes() const;
  bool finite() const;
};

// Intermediate values kept for back-propagation.
struct PairForward {
  std::vector<double> pre;     // W x + b
  std::vector<double> hidden;  // relu(pre)
  std::vector<double> mask;    // dropout multipliers (0 or 1/(1-p)); empty in eval
  std::vector<double> scores;  // v
};

PairForward forward_pair(const PairScorer& scorer, std::span<const float> head,
                         std::span<const float> tail, bool train_mode, std::uint64_t seed);

// Relation score vector v. In train mode a Bernoulli mask seeded by `seed`
// drops hidden units with inverted scaling.
std::vector<double> score_pair(const PairScorer& scorer, std::span<const float> head,
                               std::span<const float> tail, bool train_mode = false,
                               std::uint64_t seed = 0);

std::vector<double> softmax(std::span<const double> logits);
double log_sum_exp(std::span<const double> logits);

struct PairExample {
  EmbeddingVector head;
  EmbeddingVector tail;
  std::size_t relation = 0;
};

// Mean cross-entropy of softmax(v) against the gold relation, dropout off.
double mean_loss(const PairScorer& scorer, std::span<const PairExample> data);
double accuracy(const PairScorer& scorer, std::span<const PairExample> data);

struct ScorerGradient {
  std::vector<double> w, bias, r_rel;
};

// Gradient of mean_loss. With train_mode the same masks as forward_pair(seed
// + sample index) are used.
ScorerGradient loss_gradient(const PairScorer& scorer, std::span<const PairExample> data,
                             bool train_mode = false, std::uint64_t seed = 0);

struct InitOptions {
  std::size_t hidden_dim = 64;
  std::size_t relations = 0;
  double ridge = 1.0;
  std::uint64_t seed = 0;
  double dropout_rate = 0.1;
};

struct InitResult {
  PairScorer scorer;
  std::vector<std::string> warnings;
};

// Closed-form initialization from embedding statistics: W is a seeded
// Gaussian projection scaled by the per-feature spread of the inputs, b
// centres each unit on the input mean, and R_rel is the ridge-regression
// fit of the resulting ReLU features onto one-hot relation targets.
// Degenerate (constant) inputs fall back to random initialization.
InitResult init_pretrained(std::span<const PairExample> data, const InitOptions& options);

struct TrainOptions {
  std::size_t epochs = 100;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  bool use_dropout = true;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // eval-mode loss after each epoch
};

// Full-batch gradient descent on mean_loss.
PairScorer train_scorer(PairScorer scorer, std::span<const PairExample> data,
                        const TrainOptions& options, TrainReport* report = nullptr);

// Versioned blob: "SSDAUPS1", u32 header length, JSON header, then
// little-endian float64 W, b, R_rel.
std::string serialize_scorer(const PairScorer& scorer, const std::vector<std::string>& relation_names);
PairScorer deserialize_scorer(std::string_view blob, std::vector<std::string>* relation_names = nullptr);

}  // namespace ssdau
