#include "ssdau/scorer.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "ssdau/error.hpp"
#include "ssdau/simd/kernels.hpp"
#include "ssdau/util.hpp"

namespace ssdau {

using nlohmann::json;

const char* to_string(InitKind kind) {
  switch (kind) {
    case InitKind::pretrained: return "pretrained";
    case InitKind::random: return "random";
    case InitKind::zero: return "zero";
    case InitKind::loaded: return "loaded";
  }
  return "?";
}

PairScorer PairScorer::zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t relations) {
  PairScorer s;
  s.input_dim = input_dim;
  s.hidden_dim = hidden_dim;
  s.relations = relations;
  s.w.assign(hidden_dim * 2 * input_dim, 0.0);
  s.bias.assign(hidden_dim, 0.0);
  s.r_rel.assign(hidden_dim * relations, 0.0);
  s.init = InitKind::zero;
  return s;
}

PairScorer PairScorer::random(std::size_t input_dim, std::size_t hidden_dim, std::size_t relations,
                              std::uint64_t seed) {
  PairScorer s = zeros(input_dim, hidden_dim, relations);
  Rng rng(seed);
  const double w_scale = std::sqrt(2.0 / static_cast<double>(2 * input_dim));
  const double r_scale = std::sqrt(1.0 / static_cast<double>(std::max<std::size_t>(hidden_dim, 1)));
  for (auto& x : s.w) x = rng.normal() * w_scale;
  for (auto& x : s.r_rel) x = rng.normal() * r_scale;
  s.seed = seed;
  s.init = InitKind::random;
  return s;
}

void PairScorer::check_shapes() const {
  if (input_dim == 0 || hidden_dim == 0 || relations == 0 ||
      w.size() != hidden_dim * 2 * input_dim || bias.size() != hidden_dim ||
      r_rel.size() != hidden_dim * relations) {
    throw Error(ErrorKind::shape, "pair scorer parameters have inconsistent shapes");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorKind::config, "dropout rate must lie in [0, 1)");
  }
}

bool PairScorer::finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return ok(w) && ok(bias) && ok(r_rel);
}

namespace {

std::vector<double> concat(std::span<const float> head, std::span<const float> tail) {
  std::vector<double> x(head.size() + tail.size());
  for (std::size_t i = 0; i < head.size(); ++i) x[i] = head[i];
  for (std::size_t i = 0; i < tail.size(); ++i) x[head.size() + i] = tail[i];
  return x;
}

}  // namespace

PairForward forward_pair(const PairScorer& s, std::span<const float> head,
                         std::span<const float> tail, bool train_mode, std::uint64_t seed) {
  s.check_shapes();
  if (head.size() != s.input_dim || tail.size() != s.input_dim) {
    throw Error(ErrorKind::shape, "pair embeddings do not match scorer input dimension " +
                                      std::to_string(s.input_dim));
  }
  const std::vector<double> x = concat(head, tail);
  PairForward f;
  f.pre.resize(s.hidden_dim);
  simd::gemv(s.w, s.hidden_dim, 2 * s.input_dim, x, f.pre);
  f.hidden.resize(s.hidden_dim);
  for (std::size_t a = 0; a < s.hidden_dim; ++a) {
    f.pre[a] += s.bias[a];
    f.hidden[a] = f.pre[a] > 0.0 ? f.pre[a] : 0.0;
  }
  std::vector<double> dropped = f.hidden;
  if (train_mode && s.dropout_rate > 0.0) {
    Rng rng(seed);
    const double keep = 1.0 - s.dropout_rate;
    f.mask.resize(s.hidden_dim);
    for (std::size_t a = 0; a < s.hidden_dim; ++a) {
      f.mask[a] = rng.uniform() < keep ? 1.0 / keep : 0.0;
      dropped[a] *= f.mask[a];
    }
  }
  f.scores.resize(s.relations);
  simd::gemv_t(s.r_rel, s.hidden_dim, s.relations, dropped, f.scores);
  return f;
}

std::vector<double> score_pair(const PairScorer& scorer, std::span<const float> head,
                               std::span<const float> tail, bool train_mode, std::uint64_t seed) {
  return forward_pair(scorer, head, tail, train_mode, seed).scores;
}

double log_sum_exp(std::span<const double> logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : logits) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - m);
  return m + std::log(sum);
}

std::vector<double> softmax(std::span<const double> logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : logits) m = std::max(m, x);
  std::vector<double> p(logits.size(), 0.0);
  if (!std::isfinite(m)) return p;
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - m);
  for (auto& x : p) x /= sum;
  return p;
}

double mean_loss(const PairScorer& scorer, std::span<const PairExample> data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : data) {
    const auto v = score_pair(scorer, ex.head, ex.tail);
    total += log_sum_exp(v) - v.at(ex.relation);
  }
  return total / static_cast<double>(data.size());
}

double accuracy(const PairScorer& scorer, std::span<const PairExample> data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : data) {
    const auto v = score_pair(scorer, ex.head, ex.tail);
    const auto best = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    correct += best == ex.relation ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ScorerGradient loss_gradient(const PairScorer& s, std::span<const PairExample> data, bool train_mode,
                             std::uint64_t seed) {
  ScorerGradient g{std::vector<double>(s.w.size(), 0.0), std::vector<double>(s.bias.size(), 0.0),
                   std::vector<double>(s.r_rel.size(), 0.0)};
  if (data.empty()) return g;
  const double inv_n = 1.0 / static_cast<double>(data.size());
  const std::size_t in = 2 * s.input_dim;
  std::vector<double> dv(s.relations), de(s.hidden_dim);
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    const auto& ex = data[idx];
    if (ex.relation >= s.relations) throw Error(ErrorKind::shape, "gold relation index out of range");
    const PairForward f = forward_pair(s, ex.head, ex.tail, train_mode, seed + idx);
    const auto p = softmax(f.scores);
    for (std::size_t k = 0; k < s.relations; ++k) dv[k] = (p[k] - (k == ex.relation ? 1.0 : 0.0)) * inv_n;
    // dR[a][k] = dropped[a] * dv[k]; de = R dv (through the mask)
    simd::gemv(s.r_rel, s.hidden_dim, s.relations, dv, de);
    for (std::size_t a = 0; a < s.hidden_dim; ++a) {
      const double m = f.mask.empty() ? 1.0 : f.mask[a];
      const double dropped = f.hidden[a] * m;
      if (dropped != 0.0) simd::axpy(dropped, dv, std::span<double>(g.r_rel.data() + a * s.relations, s.relations));
      const double dz = f.pre[a] > 0.0 ? de[a] * m : 0.0;
      if (dz == 0.0) continue;
      g.bias[a] += dz;
      double* row = g.w.data() + a * in;
      for (std::size_t i = 0; i < s.input_dim; ++i) row[i] += dz * ex.head[i];
      for (std::size_t i = 0; i < s.input_dim; ++i) row[s.input_dim + i] += dz * ex.tail[i];
    }
  }
  return g;
}

InitResult init_pretrained(std::span<const PairExample> data, const InitOptions& options) {
  if (data.empty()) throw Error(ErrorKind::model, "pretrained initialization needs training pairs");
  if (!(options.ridge > 0.0)) throw Error(ErrorKind::config, "ridge must be positive");
  const std::size_t d = data.front().head.size();
  const std::size_t in = 2 * d;
  const std::size_t hidden = options.hidden_dim;
  std::size_t k = options.relations;
  for (const auto& ex : data) {
    if (ex.head.size() != d || ex.tail.size() != d) throw Error(ErrorKind::shape, "inconsistent pair dimensions");
    k = std::max(k, ex.relation + 1);
  }
  InitResult result;

  std::vector<double> mean(in, 0.0), spread(in, 0.0);
  for (const auto& ex : data) {
    for (std::size_t i = 0; i < d; ++i) {
      mean[i] += ex.head[i];
      mean[d + i] += ex.tail[i];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (auto& m : mean) m *= inv_n;
  for (const auto& ex : data) {
    for (std::size_t i = 0; i < d; ++i) {
      spread[i] += (ex.head[i] - mean[i]) * (ex.head[i] - mean[i]);
      spread[d + i] += (ex.tail[i] - mean[d + i]) * (ex.tail[i] - mean[d + i]);
    }
  }
  double max_spread = 0.0;
  for (auto& s : spread) {
    s = std::sqrt(s * inv_n);
    max_spread = std::max(max_spread, s);
  }
  if (max_spread < 1e-12) {
    result.warnings.push_back("pretrained initialization: inputs are constant; using random init");
    result.scorer = PairScorer::random(d, hidden, k, options.seed);
    result.scorer.dropout_rate = options.dropout_rate;
    return result;
  }

  PairScorer s = PairScorer::zeros(d, hidden, k);
  s.seed = options.seed;
  s.dropout_rate = options.dropout_rate;
  s.init = InitKind::pretrained;
  Rng rng(options.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  const double floor = 1e-3 * max_spread;
  for (std::size_t a = 0; a < hidden; ++a) {
    double shift = 0.0;
    for (std::size_t i = 0; i < in; ++i) {
      const double w = rng.normal() * scale / std::max(spread[i], floor);
      s.w[a * in + i] = w;
      shift += w * mean[i];
    }
    s.bias[a] = -shift;
  }

  // Ridge fit of relu features onto one-hot targets.
  Eigen::MatrixXd features(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(hidden));
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(k));
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto f = forward_pair(s, data[n].head, data[n].tail, false, 0);
    for (std::size_t a = 0; a < hidden; ++a) features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(a)) = f.hidden[a];
    targets(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(data[n].relation)) = 1.0;
  }
  Eigen::MatrixXd gram = features.transpose() * features;
  gram.diagonal().array() += options.ridge;
  const Eigen::MatrixXd solution = gram.llt().solve(features.transpose() * targets);
  for (std::size_t a = 0; a < hidden; ++a) {
    for (std::size_t r = 0; r < k; ++r) {
      s.r_rel[a * k + r] = solution(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(r));
    }
  }
  if (!s.finite()) throw Error(ErrorKind::model, "pretrained initialization produced non-finite values");
  result.scorer = std::move(s);
  return result;
}

PairScorer train_scorer(PairScorer scorer, std::span<const PairExample> data,
                        const TrainOptions& options, TrainReport* report) {
  scorer.check_shapes();
  if (!(options.learning_rate >= 0.0)) throw Error(ErrorKind::config, "learning rate must be >= 0");
  if (options.learning_rate == 0.0 || data.empty()) return scorer;
  const bool dropout = options.use_dropout && scorer.dropout_rate > 0.0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const auto g = loss_gradient(scorer, data, dropout,
                                 derive_seed(options.seed, "epoch-" + std::to_string(epoch)));
    simd::axpy(-options.learning_rate, g.w, scorer.w);
    simd::axpy(-options.learning_rate, g.bias, scorer.bias);
    simd::axpy(-options.learning_rate, g.r_rel, scorer.r_rel);
    const double loss = mean_loss(scorer, data);
    if (!std::isfinite(loss) || !scorer.finite()) {
      throw Error(ErrorKind::divergence, "training diverged at epoch " + std::to_string(epoch));
    }
    if (report) report->epoch_loss.push_back(loss);
  }
  return scorer;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'S', 'D', 'A', 'U', 'P', 'S', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64s(std::string& out, const std::vector<double>& values) {
  for (double x : values) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

}  // namespace

std::string serialize_scorer(const PairScorer& s, const std::vector<std::string>& relation_names) {
  s.check_shapes();
  json header{{"format", "ssdau-pair-scorer"},
              {"version", 1},
              {"input_dim", s.input_dim},
              {"hidden_dim", s.hidden_dim},
              {"relations", s.relations},
              {"dropout_rate", s.dropout_rate},
              {"seed", s.seed},
              {"init", to_string(s.init)},
              {"relation_names", relation_names}};
  const std::string h = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  put_f64s(out, s.w);
  put_f64s(out, s.bias);
  put_f64s(out, s.r_rel);
  return out;
}

PairScorer deserialize_scorer(std::string_view blob, std::vector<std::string>* relation_names) {
  if (blob.size() < 12 || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorKind::parse, "not a pair scorer blob");
  }
  auto byte = [&](std::size_t i) { return static_cast<std::uint64_t>(static_cast<unsigned char>(blob[i])); };
  std::uint32_t hlen = 0;
  for (int i = 0; i < 4; ++i) hlen |= static_cast<std::uint32_t>(byte(8 + i) << (8 * i));
  if (12 + hlen > blob.size()) throw Error(ErrorKind::parse, "truncated scorer header");
  json header;
  try {
    header = json::parse(blob.substr(12, hlen));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("bad scorer header: ") + e.what());
  }
  if (header.value("version", 0) != 1) throw Error(ErrorKind::parse, "unsupported scorer version");
  PairScorer s = PairScorer::zeros(header.at("input_dim").get<std::size_t>(),
                                   header.at("hidden_dim").get<std::size_t>(),
                                   header.at("relations").get<std::size_t>());
  s.dropout_rate = header.at("dropout_rate").get<double>();
  s.seed = header.at("seed").get<std::uint64_t>();
  s.init = InitKind::loaded;
  if (relation_names) *relation_names = header.value("relation_names", std::vector<std::string>{});
  std::size_t pos = 12 + hlen;
  auto read = [&](std::vector<double>& v) {
    if (pos + 8 * v.size() > blob.size()) throw Error(ErrorKind::parse, "truncated scorer parameters");
    for (auto& x : v) {
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= byte(pos + i) << (8 * i);
      x = std::bit_cast<double>(bits);
      pos += 8;
    }
  };
  read(s.w);
  read(s.bias);
  read(s.r_rel);
  if (pos != blob.size()) throw Error(ErrorKind::parse, "trailing bytes after scorer parameters");
  return s;
}

}  // namespace ssdau
