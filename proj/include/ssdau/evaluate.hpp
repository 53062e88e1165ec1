#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ssdau/augment.hpp"
#include "ssdau/corpus.hpp"
#include "ssdau/matching.hpp"

namespace ssdau {

// exact compares full entity surfaces; partial compares only the last token
// of each entity. Relations always compare exactly.
enum class MatchMode { exact, partial };

const char* to_string(MatchMode mode);
std::optional<MatchMode> parse_match_mode(std::string_view name);

struct TripleKey {
  std::string sentence_id;  // empty when keys are not scoped to a sentence
  std::string head;
  std::string relation;
  std::string tail;

  auto operator<=>(const TripleKey&) const = default;
};

using TripleSet = std::set<TripleKey>;

std::string normalize_entity(std::string_view surface, MatchMode mode);
TripleKey triple_key(const Triple& t, MatchMode mode, std::string sentence_id = {});
TripleSet triple_set(const std::vector<Triple>& triples, MatchMode mode, const std::string& sentence_id = {});
// Keys scoped by sentence id, for corpus-level (micro) scoring.
TripleSet triple_set(const Dataset& dataset, MatchMode mode);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
};

// precision = |P & G| / |P|, 1 when both are empty and 0 when only P is;
// recall mirrors it. f1 is 0 when precision and recall are both 0.
// iou = |P & G| / |P | G|, 1 when both are empty.
Metrics metrics(const TripleSet& pred, const TripleSet& gold);

// Micro: one pooled set of sentence-scoped keys. Macro: mean of per-sentence
// metrics over every sentence id present in either side.
Metrics evaluate_datasets(const Dataset& pred, const Dataset& gold, MatchMode mode, bool macro = false);

struct SweepBin {
  double lo = 0.0;
  double hi = 0.0;
  bool closed_hi = false;  // the last bin includes its upper edge

  bool contains(double theta) const { return theta >= lo && (theta < hi || (closed_hi && theta <= hi)); }
  std::string label() const;
};

// "lo:hi:step" -> consecutive bins; edges are snapped to a 1e-9 grid and the
// final bin is closed.
std::vector<SweepBin> parse_bins(std::string_view spec);
// Throws unless bins are nonempty, ascending, and disjoint.
void validate_bins(const std::vector<SweepBin>& bins);

struct SweepRow {
  std::string dataset;
  SweepBin bin;
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;

  std::size_t sum() const { return head + relation + tail; }
};

struct SweepReport {
  std::vector<SweepRow> rows;

  std::string render() const;
};

// Runs the single-role modes (head_only, relation_only, tail_only) with the
// policy template's thresholds replaced by the lowest bin edge and no
// per-sentence cap, then histograms each produced instance's Θ (its weakest
// step) into the bins.
SweepReport sweep(const std::string& dataset_name, const Dataset& dataset, const QueueMap& queues,
                  const AugmentPolicy& policy_template, const std::vector<SweepBin>& bins);

struct TripletCountRow {
  std::size_t original = 0;
  std::size_t augmented = 0;
};

// Keyed by number of gold triples per sentence.
std::map<std::size_t, TripletCountRow> triplet_count_breakdown(const Dataset& dataset,
                                                               const std::vector<AugmentedInstance>& augmented);

}  // namespace ssdau
