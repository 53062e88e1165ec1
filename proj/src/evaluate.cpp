#include "ssdau/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ssdau/error.hpp"

namespace ssdau {

const char* to_string(MatchMode mode) { return mode == MatchMode::exact ? "exact" : "partial"; }

std::optional<MatchMode> parse_match_mode(std::string_view name) {
  if (name == "exact") return MatchMode::exact;
  if (name == "partial") return MatchMode::partial;
  return std::nullopt;
}

std::string normalize_entity(std::string_view surface, MatchMode mode) {
  if (mode == MatchMode::exact) return std::string(surface);
  const auto tokens = tokenize(surface);
  if (tokens.empty()) return std::string(surface);
  return tokens.back().surface;
}

TripleKey triple_key(const Triple& t, MatchMode mode, std::string sentence_id) {
  return TripleKey{std::move(sentence_id), normalize_entity(t.head.surface, mode), t.relation,
                   normalize_entity(t.tail.surface, mode)};
}

TripleSet triple_set(const std::vector<Triple>& triples, MatchMode mode, const std::string& sentence_id) {
  TripleSet out;
  for (const auto& t : triples) out.insert(triple_key(t, mode, sentence_id));
  return out;
}

TripleSet triple_set(const Dataset& dataset, MatchMode mode) {
  TripleSet out;
  for (const auto& inst : dataset) {
    for (const auto& t : inst.triples) out.insert(triple_key(t, mode, inst.sentence.id));
  }
  return out;
}

Metrics metrics(const TripleSet& pred, const TripleSet& gold) {
  std::size_t inter = 0;
  for (const auto& k : pred) inter += gold.count(k);
  const std::size_t uni = pred.size() + gold.size() - inter;
  Metrics m;
  auto ratio = [&](std::size_t denom, bool other_empty) {
    if (denom == 0) return other_empty ? 1.0 : 0.0;
    return static_cast<double>(inter) / static_cast<double>(denom);
  };
  m.precision = ratio(pred.size(), gold.empty());
  m.recall = ratio(gold.size(), pred.empty());
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  return m;
}

Metrics evaluate_datasets(const Dataset& pred, const Dataset& gold, MatchMode mode, bool macro) {
  if (!macro) return metrics(triple_set(pred, mode), triple_set(gold, mode));
  std::map<std::string, std::pair<TripleSet, TripleSet>> per;
  for (const auto& inst : pred) {
    auto& p = per[inst.sentence.id].first;
    for (const auto& t : inst.triples) p.insert(triple_key(t, mode));
  }
  for (const auto& inst : gold) {
    auto& g = per[inst.sentence.id].second;
    for (const auto& t : inst.triples) g.insert(triple_key(t, mode));
  }
  Metrics sum;
  if (per.empty()) return metrics({}, {});
  for (const auto& [id, sets] : per) {
    const Metrics m = metrics(sets.first, sets.second);
    sum.precision += m.precision;
    sum.recall += m.recall;
    sum.f1 += m.f1;
    sum.iou += m.iou;
  }
  const double n = static_cast<double>(per.size());
  return Metrics{sum.precision / n, sum.recall / n, sum.f1 / n, sum.iou / n};
}

namespace {

double snap(double x) { return std::round(x * 1e9) / 1e9; }

std::string fmt_edge(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

std::string SweepBin::label() const {
  return "[" + fmt_edge(lo) + "," + fmt_edge(hi) + (closed_hi ? "]" : ")");
}

std::vector<SweepBin> parse_bins(std::string_view spec) {
  double lo = 0, hi = 0, step = 0;
  const std::string s(spec);
  char tail = 0;
  if (std::sscanf(s.c_str(), "%lf:%lf:%lf%c", &lo, &hi, &step, &tail) != 3) {
    throw Error(ErrorKind::config, "bins must look like lo:hi:step, got '" + s + "'");
  }
  if (!(step > 0.0) || !(hi > lo)) throw Error(ErrorKind::config, "bins need hi > lo and step > 0");
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step));
  if (count == 0 || count > 100000) throw Error(ErrorKind::config, "bad bin count for '" + s + "'");
  std::vector<SweepBin> bins;
  for (std::size_t i = 0; i < count; ++i) {
    const double a = snap(lo + step * static_cast<double>(i));
    const double b = i + 1 == count ? snap(hi) : snap(lo + step * static_cast<double>(i + 1));
    bins.push_back({a, b, i + 1 == count});
  }
  validate_bins(bins);
  return bins;
}

void validate_bins(const std::vector<SweepBin>& bins) {
  if (bins.empty()) throw Error(ErrorKind::config, "no sweep bins");
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (!(bins[i].hi > bins[i].lo)) throw Error(ErrorKind::config, "empty sweep bin " + bins[i].label());
    if (i > 0 && bins[i].lo < bins[i - 1].hi) throw Error(ErrorKind::config, "sweep bins overlap or are unordered");
    if (i + 1 < bins.size() && bins[i].closed_hi && bins[i + 1].lo <= bins[i].hi) {
      throw Error(ErrorKind::config, "closed sweep bin overlaps its successor");
    }
  }
}

std::string SweepReport::render() const {
  std::vector<std::vector<std::string>> cells{{"Dataset", "ε", "Head", "Relation", "Tail", "Sum."}};
  for (const auto& r : rows) {
    cells.push_back({r.dataset, r.bin.label(), std::to_string(r.head), std::to_string(r.relation),
                     std::to_string(r.tail), std::to_string(r.sum())});
  }
  // Width in code points so the epsilon header lines up.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  }
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(widths[c] - width(row[c]), ' ');
      if (c < 2) {
        out << row[c] << pad;
      } else {
        out << pad << row[c];
      }
      out << (c + 1 < row.size() ? "  " : "\n");
    }
  }
  return out.str();
}

SweepReport sweep(const std::string& dataset_name, const Dataset& dataset, const QueueMap& queues,
                  const AugmentPolicy& policy_template, const std::vector<SweepBin>& bins) {
  validate_bins(bins);
  SweepReport report;
  for (const auto& b : bins) report.rows.push_back({dataset_name, b, 0, 0, 0});
  const std::pair<AugmentMode, std::size_t SweepRow::*> modes[] = {
      {AugmentMode::head_only, &SweepRow::head},
      {AugmentMode::relation_only, &SweepRow::relation},
      {AugmentMode::tail_only, &SweepRow::tail},
  };
  for (const auto& [mode, field] : modes) {
    AugmentPolicy policy = policy_template;
    policy.mode = mode;
    policy.epsilon = bins.front().lo;
    policy.epsilon_entity.reset();
    policy.epsilon_relation.reset();
    policy.max_per_sentence = std::numeric_limits<std::size_t>::max();
    for (const auto& inst : augment_dataset(dataset, queues, policy)) {
      const auto& th = inst.provenance.theta;
      const double theta = th.empty() ? 0.0 : *std::min_element(th.begin(), th.end());
      for (auto& row : report.rows) {
        if (row.bin.contains(theta)) {
          ++(row.*field);
          break;
        }
      }
    }
  }
  return report;
}

std::map<std::size_t, TripletCountRow> triplet_count_breakdown(const Dataset& dataset,
                                                               const std::vector<AugmentedInstance>& augmented) {
  std::map<std::size_t, TripletCountRow> out;
  for (const auto& inst : dataset) ++out[inst.triples.size()].original;
  for (const auto& a : augmented) ++out[a.triples.size()].augmented;
  return out;
}

}  // namespace ssdau
