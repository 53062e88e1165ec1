#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ssdau/augment.hpp"
#include "ssdau/consistency.hpp"
#include "ssdau/corpus.hpp"
#include "ssdau/discretize.hpp"
#include "ssdau/matching.hpp"

namespace ssdau {

// blocks.json: the block library plus the sentences it refers to, so the
// match stage can run from this file alone.
struct BlocksFile {
  std::size_t context_width = kDefaultContextWidth;
  SplitMode split_mode = SplitMode::labeled;
  SentenceIndex sentences;
  BlockLibrary library;
  std::vector<std::string> skipped;
};

std::string blocks_to_json(const BlocksFile& file);
BlocksFile blocks_from_json(std::string_view text);

// queues.json: every candidate with its component breakdown.
std::string queues_to_json(const QueueMap& queues, const MatchOptions& options);
QueueMap queues_from_json(std::string_view text);

// Augmented records are dataset records with an extra "provenance" object.
std::string augmented_to_jsonl(const std::vector<AugmentedInstance>& instances);
std::vector<AugmentedInstance> augmented_from_jsonl(std::string_view text);

std::string consistency_to_json(const std::vector<ConsistencyResult>& results);

}  // namespace ssdau
