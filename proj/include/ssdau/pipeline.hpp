#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssdau/augment.hpp"
#include "ssdau/consistency.hpp"
#include "ssdau/corpus.hpp"
#include "ssdau/discretize.hpp"
#include "ssdau/embedding.hpp"
#include "ssdau/error.hpp"
#include "ssdau/matching.hpp"
#include "ssdau/serialize.hpp"
#include "ssdau/topics.hpp"

namespace ssdau {

enum class FilterOrder { topic_first, zeta_first };
const char* to_string(FilterOrder order);

struct FilterConfig {
  double keep_fraction = 0.8;
  std::size_t k_topics = 8;
  double min_affinity = 0.7;
  double nu_floor = kDefaultCoherenceFloor;
  FilterOrder order = FilterOrder::topic_first;
  std::size_t hidden_dim = 64;
  double ridge = 1.0;
  std::size_t epochs = 50;
  double learning_rate = 0.1;
  double dropout_rate = 0.1;
  std::size_t max_span_length = 16;
};

struct RunConfig {
  std::string dataset;
  InputFormat format = InputFormat::jsonl;
  std::string foreign;  // optional perturbation pool
  InputFormat foreign_format = InputFormat::jsonl;
  double perturbation_rate = 0.0;
  std::size_t max_tokens = 128;
  UnknownRelationPolicy unknown_relations = UnknownRelationPolicy::fail;
  ProviderConfig provider;
  std::size_t context_width = kDefaultContextWidth;
  SplitMode split_mode = SplitMode::labeled;
  SimilarityWeights weights;
  double floor = 0.0;
  std::size_t per_group_cap = 5000;
  AugmentPolicy policy;
  FilterConfig filter;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::size_t threads = 1;
  bool append = true;

  // Checks ranges, that the seed is present, and that input files exist.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
// Missing fields keep their defaults; unknown fields are config errors.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// A stage failed after validation passed.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "stage " + stage + ": " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// ---------------------------------------------------------------------------
// Stages. The CLI subcommands and run_pipeline share these.

Dataset load_input(const RunConfig& config, LoadReport* report = nullptr);

BlocksFile stage_discretize(const Dataset& dataset, std::size_t context_width, SplitMode mode);

QueueMap stage_match(const BlocksFile& blocks, const EmbeddingProvider& provider, const MatchOptions& options);

struct FilterCounts {
  std::size_t input = 0;
  std::size_t coherence_dropped = 0;
  std::size_t topic_dropped = 0;
  std::size_t zeta_dropped = 0;
  std::size_t kept = 0;
};

struct FilterOutcome {
  std::vector<AugmentedInstance> kept;  // in input order
  std::vector<ConsistencyResult> ranking;
  std::string scorer_blob;
  FilterCounts counts;
  std::vector<std::string> warnings;
};

// `sources` are the original instances: they supply the source sentences,
// the topic model, and the scorer's training pairs.
FilterOutcome stage_filter(const Dataset& sources, const std::vector<AugmentedInstance>& augmented,
                           const EmbeddingProvider& provider, const FilterConfig& config,
                           std::uint64_t seed, std::size_t threads);

std::uint64_t stage_seed(std::uint64_t run_seed, const std::string& stage);

// Originals verbatim, then the kept augmented instances.
Dataset append_augmented(const Dataset& originals, const std::vector<AugmentedInstance>& kept);

struct RunResult {
  nlohmann::json manifest;
  std::map<std::string, std::string> artifact_hashes;  // file name -> SHA-256
};

// Writes blocks.json, queues.json, augmented.jsonl, consistency.json,
// scorer.bin, filtered.jsonl, final.jsonl and manifest.json into the output
// directory. On a stage failure the manifest is written with the failing
// stage and a StageError is thrown.
RunResult run_pipeline(const RunConfig& config);

}  // namespace ssdau
