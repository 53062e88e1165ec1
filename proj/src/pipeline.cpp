#include "ssdau/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>

#include "ssdau/parallel.hpp"
#include "ssdau/util.hpp"

namespace ssdau {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(FilterOrder order) {
  return order == FilterOrder::topic_first ? "topic_first" : "zeta_first";
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::config, what); }

// Reads fields from one JSON object and rejects any it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) bad(where_ + " must be a JSON object");
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) bad("unknown config field " + where_ + "." + k);
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      bad("config field " + where_ + "." + key + " has the wrong type");
    }
  }
  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }
  template <typename T, typename Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string name;
    get(key, name);
    if (name.empty()) return;
    const auto v = parse(name);
    if (!v) bad("config field " + where_ + "." + key + " has unknown value '" + name + "'");
    out = *v;
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::optional<FilterOrder> parse_filter_order(std::string_view name) {
  if (name == "topic_first") return FilterOrder::topic_first;
  if (name == "zeta_first") return FilterOrder::zeta_first;
  return std::nullopt;
}

std::optional<UnknownRelationPolicy> parse_unknown_policy(std::string_view name) {
  if (name == "fail") return UnknownRelationPolicy::fail;
  if (name == "skip") return UnknownRelationPolicy::skip;
  return std::nullopt;
}

json weights_json(const SimilarityWeights& w) {
  return json::array({w.semantic, w.syntactic, w.lexical, w.context, w.contextual_embedding});
}

}  // namespace

json to_json(const RunConfig& c) {
  const auto& p = c.provider;
  const auto& f = c.filter;
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{
      {"dataset", c.dataset},
      {"format", to_string(c.format)},
      {"foreign", c.foreign},
      {"foreign_format", to_string(c.foreign_format)},
      {"perturbation_rate", c.perturbation_rate},
      {"max_tokens", c.max_tokens},
      {"unknown_relations", c.unknown_relations == UnknownRelationPolicy::fail ? "fail" : "skip"},
      {"provider",
       {{"kind", to_string(p.kind)},
        {"dimension", p.dimension},
        {"endpoint", p.endpoint},
        {"cache_dir", p.cache_dir},
        {"cache_backend", p.cache_backend},
        {"timeout_seconds", p.timeout_seconds},
        {"retries", p.retries},
        {"max_in_flight", p.max_in_flight},
        {"seed", p.seed}}},
      {"context_width", c.context_width},
      {"split_mode", to_string(c.split_mode)},
      {"weights", weights_json(c.weights)},
      {"floor", c.floor},
      {"per_group_cap", c.per_group_cap},
      {"policy",
       {{"mode", to_string(c.policy.mode)},
        {"epsilon", c.policy.epsilon},
        {"epsilon_entity", opt(c.policy.epsilon_entity)},
        {"epsilon_relation", opt(c.policy.epsilon_relation)},
        {"max_per_sentence", c.policy.max_per_sentence}}},
      {"filter",
       {{"keep_fraction", f.keep_fraction},
        {"k_topics", f.k_topics},
        {"min_affinity", f.min_affinity},
        {"nu_floor", f.nu_floor},
        {"order", to_string(f.order)},
        {"hidden_dim", f.hidden_dim},
        {"ridge", f.ridge},
        {"epochs", f.epochs},
        {"learning_rate", f.learning_rate},
        {"dropout_rate", f.dropout_rate},
        {"max_span_length", f.max_span_length}}},
      {"seed", c.seed ? json(*c.seed) : json(nullptr)},
      {"output_dir", c.output_dir},
      {"threads", c.threads},
      {"append", c.append},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  ObjectReader r(j, "config");
  r.get("dataset", c.dataset);
  r.get_enum("format", c.format, parse_input_format);
  r.get("foreign", c.foreign);
  r.get_enum("foreign_format", c.foreign_format, parse_input_format);
  r.get("perturbation_rate", c.perturbation_rate);
  r.get("max_tokens", c.max_tokens);
  r.get_enum("unknown_relations", c.unknown_relations, parse_unknown_policy);
  if (const json* p = r.child("provider")) {
    ObjectReader pr(*p, "provider");
    pr.get_enum("kind", c.provider.kind, parse_provider_kind);
    pr.get("dimension", c.provider.dimension);
    pr.get("endpoint", c.provider.endpoint);
    pr.get("cache_dir", c.provider.cache_dir);
    pr.get("cache_backend", c.provider.cache_backend);
    pr.get("timeout_seconds", c.provider.timeout_seconds);
    pr.get("retries", c.provider.retries);
    pr.get("max_in_flight", c.provider.max_in_flight);
    pr.get("seed", c.provider.seed);
  }
  r.get("context_width", c.context_width);
  r.get_enum("split_mode", c.split_mode, parse_split_mode);
  if (const json* w = r.child("weights")) {
    if (w->is_string()) {
      c.weights = SimilarityWeights::parse(w->get<std::string>());
    } else if (w->is_array() && w->size() == 5) {
      try {
        c.weights = {(*w)[0].get<double>(), (*w)[1].get<double>(), (*w)[2].get<double>(),
                     (*w)[3].get<double>(), (*w)[4].get<double>()};
      } catch (const json::exception&) {
        bad("weights must be numbers");
      }
    } else {
      bad("weights must be a list of five numbers");
    }
  }
  r.get("floor", c.floor);
  r.get("per_group_cap", c.per_group_cap);
  if (const json* p = r.child("policy")) {
    ObjectReader pr(*p, "policy");
    pr.get_enum("mode", c.policy.mode, parse_augment_mode);
    pr.get("epsilon", c.policy.epsilon);
    pr.get_optional("epsilon_entity", c.policy.epsilon_entity);
    pr.get_optional("epsilon_relation", c.policy.epsilon_relation);
    pr.get("max_per_sentence", c.policy.max_per_sentence);
  }
  if (const json* f = r.child("filter")) {
    ObjectReader fr(*f, "filter");
    fr.get("keep_fraction", c.filter.keep_fraction);
    fr.get("k_topics", c.filter.k_topics);
    fr.get("min_affinity", c.filter.min_affinity);
    fr.get("nu_floor", c.filter.nu_floor);
    fr.get_enum("order", c.filter.order, parse_filter_order);
    fr.get("hidden_dim", c.filter.hidden_dim);
    fr.get("ridge", c.filter.ridge);
    fr.get("epochs", c.filter.epochs);
    fr.get("learning_rate", c.filter.learning_rate);
    fr.get("dropout_rate", c.filter.dropout_rate);
    fr.get("max_span_length", c.filter.max_span_length);
  }
  r.get_optional("seed", c.seed);
  r.get("output_dir", c.output_dir);
  r.get("threads", c.threads);
  r.get("append", c.append);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    bad("config " + path + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void RunConfig::validate() const {
  if (!seed) bad("seed is required");
  if (dataset.empty()) bad("dataset path is required");
  if (!fs::is_regular_file(dataset)) bad("dataset not found: " + dataset);
  if (!foreign.empty() && !fs::is_regular_file(foreign)) bad("foreign dataset not found: " + foreign);
  if (!(perturbation_rate >= 0.0 && perturbation_rate <= 1.0)) bad("perturbation_rate must lie in [0, 1]");
  if (perturbation_rate > 0.0 && foreign.empty()) bad("perturbation_rate needs a foreign dataset");
  if (output_dir.empty()) bad("output_dir is required");
  if (max_tokens == 0) bad("max_tokens must be positive");
  ssdau::validate(provider);
  weights.validate();
  if (!(floor >= 0.0 && floor <= 1.0)) bad("floor must lie in [0, 1]");
  if (per_group_cap == 0) bad("per_group_cap must be positive");
  policy.validate();
  if (!(filter.keep_fraction > 0.0 && filter.keep_fraction <= 1.0)) bad("keep_fraction must lie in (0, 1]");
  if (filter.k_topics == 0) bad("k_topics must be at least 1");
  if (!(filter.min_affinity >= 0.0 && filter.min_affinity <= 1.0)) bad("min_affinity must lie in [0, 1]");
  if (!(filter.nu_floor >= 0.0 && filter.nu_floor <= 1.0)) bad("nu_floor must lie in [0, 1]");
  if (filter.hidden_dim == 0) bad("hidden_dim must be positive");
  if (!(filter.ridge > 0.0)) bad("ridge must be positive");
  if (!(filter.learning_rate >= 0.0)) bad("learning_rate must be >= 0");
  if (!(filter.dropout_rate >= 0.0 && filter.dropout_rate < 1.0)) bad("dropout_rate must lie in [0, 1)");
  if (filter.max_span_length == 0) bad("max_span_length must be positive");
  if (threads == 0) bad("threads must be at least 1");
}

// ---------------------------------------------------------------------------

std::uint64_t stage_seed(std::uint64_t run_seed, const std::string& stage) { return derive_seed(run_seed, stage); }

Dataset load_input(const RunConfig& config, LoadReport* report) {
  LoadOptions options;
  options.max_tokens = config.max_tokens;
  options.unknown_relations = config.unknown_relations;
  LoadResult loaded = load_dataset(config.dataset, config.format, options);
  if (report) *report = loaded.report;
  if (config.perturbation_rate > 0.0) {
    LoadOptions foreign_options;
    foreign_options.max_tokens = config.max_tokens;
    foreign_options.unknown_relations = UnknownRelationPolicy::skip;
    const Dataset foreign = load_dataset(config.foreign, config.foreign_format, foreign_options).dataset;
    return inject_perturbation(loaded.dataset, foreign, config.perturbation_rate,
                               stage_seed(*config.seed, "perturb"));
  }
  return std::move(loaded.dataset);
}

BlocksFile stage_discretize(const Dataset& dataset, std::size_t context_width, SplitMode mode) {
  BlocksFile f;
  f.context_width = context_width;
  f.split_mode = mode;
  f.sentences = index_sentences(dataset);
  EncodeResult enc = encode_dataset(dataset, context_width, mode);
  f.library = group_blocks(enc.blocks, RelationSchema::from_dataset(dataset));
  f.skipped = std::move(enc.skipped);
  return f;
}

QueueMap stage_match(const BlocksFile& blocks, const EmbeddingProvider& provider, const MatchOptions& options) {
  return build_queues(blocks.library, blocks.sentences, provider, options);
}

FilterOutcome stage_filter(const Dataset& sources, const std::vector<AugmentedInstance>& augmented,
                           const EmbeddingProvider& provider, const FilterConfig& config,
                           std::uint64_t seed, std::size_t threads) {
  FilterOutcome out;
  out.counts.input = augmented.size();
  if (augmented.empty()) return out;

  const SentenceIndex index = index_sentences(sources);
  auto source_of = [&](const AugmentedInstance& a) -> const Sentence& {
    const auto it = index.find(a.provenance.source_id);
    if (it == index.end()) throw Error(ErrorKind::config, "augmented instance " + a.sentence.id + " has unknown source " + a.provenance.source_id);
    return it->second;
  };

  // Coherence gate.
  std::vector<std::size_t> alive;
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    if (coherence_score(source_of(augmented[i]), augmented[i]).nu >= config.nu_floor) {
      alive.push_back(i);
    } else {
      ++out.counts.coherence_dropped;
    }
  }

  // Topic model over the source sentences.
  std::vector<Sentence> sentences;
  for (const auto& inst : sources) sentences.push_back(inst.sentence);
  TopicOptions topic_options;
  topic_options.k_topics = config.k_topics;
  topic_options.seed = stage_seed(seed, "filter.topics");
  topic_options.threads = threads;
  if (sentences.size() < topic_options.k_topics) {
    out.warnings.push_back("k_topics reduced from " + std::to_string(config.k_topics) + " to " +
                           std::to_string(sentences.size()) + " (corpus too small)");
    topic_options.k_topics = sentences.size();
  }
  const TopicModel topics = fit_topics(sentences, provider, topic_options);
  auto topic_pass = [&](std::vector<std::size_t> ids) {
    std::vector<char> keep(ids.size(), 0);
    parallel_for(ids.size(), threads, [&](std::size_t k) {
      const auto& a = augmented[ids[k]];
      keep[k] = topic_filter(topics, provider, source_of(a), a.sentence, config.min_affinity) ? 1 : 0;
    });
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (keep[k]) {
        kept.push_back(ids[k]);
      } else {
        ++out.counts.topic_dropped;
      }
    }
    return kept;
  };

  // Pair scorer: ridge init on the sources' gold pairs, then training.
  const RelationSchema schema = RelationSchema::from_dataset(sources);
  const auto examples = pair_examples(sources, provider, schema);
  InitOptions init;
  init.hidden_dim = config.hidden_dim;
  init.relations = schema.size();
  init.ridge = config.ridge;
  init.seed = stage_seed(seed, "filter.scorer_init");
  init.dropout_rate = config.dropout_rate;
  InitResult initialized = init_pretrained(examples, init);
  for (auto& w : initialized.warnings) out.warnings.push_back(std::move(w));
  TrainOptions train;
  train.epochs = config.epochs;
  train.learning_rate = config.learning_rate;
  train.seed = stage_seed(seed, "filter.scorer_train");
  const PairScorer scorer = train_scorer(std::move(initialized.scorer), examples, train);
  out.scorer_blob = serialize_scorer(scorer, schema.relations());

  const std::size_t vocab = tag_vocab_for_max_span(config.max_span_length);
  std::vector<TagAssignment> gold;
  for (const auto& inst : sources) gold.push_back(triples_to_tags(inst.sentence, inst.triples, schema, vocab));
  ZetaContext ctx{&scorer, &provider, &schema, vocab, tag_log_prior(gold, vocab)};

  auto zeta_pass = [&](const std::vector<std::size_t>& ids) {
    std::vector<AugmentedInstance> subset;
    for (std::size_t i : ids) subset.push_back(augmented[i]);
    out.ranking = filter_consistency(subset, ctx, config.keep_fraction, threads);
    std::set<std::string> kept_ids;
    for (const auto& r : out.ranking) {
      if (r.kept) kept_ids.insert(r.id);
    }
    std::vector<std::size_t> kept;
    for (std::size_t i : ids) {
      if (kept_ids.count(augmented[i].sentence.id)) {
        kept.push_back(i);
      } else {
        ++out.counts.zeta_dropped;
      }
    }
    return kept;
  };

  if (config.order == FilterOrder::topic_first) {
    alive = zeta_pass(topic_pass(alive));
  } else {
    alive = topic_pass(zeta_pass(alive));
  }
  for (std::size_t i : alive) out.kept.push_back(augmented[i]);
  out.counts.kept = out.kept.size();
  return out;
}

Dataset append_augmented(const Dataset& originals, const std::vector<AugmentedInstance>& kept) {
  Dataset out = originals;
  for (const auto& a : kept) out.push_back(a.as_instance());
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct ManifestWriter {
  json manifest;
  fs::path dir;
  std::map<std::string, std::string> hashes;

  void artifact(const std::string& name, const std::string& contents) {
    write_file((dir / name).string(), contents);
    hashes[name] = sha256_hex(contents);
    manifest["artifacts"][name] = hashes[name];
  }

  void finish(const std::chrono::steady_clock::time_point& start) {
    std::string digest_input;
    for (const auto& [name, h] : hashes) digest_input += name + "=" + h + "\n";
    manifest["artifact_digest"] = sha256_hex(digest_input);
    manifest["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  }
};

}  // namespace

RunResult run_pipeline(const RunConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = *config.seed;
  fs::create_directories(config.output_dir);

  ManifestWriter w;
  w.dir = config.output_dir;
  const json cfg = to_json(config);
  w.manifest["config"] = cfg;
  w.manifest["config_hash"] = sha256_hex(cfg.dump());
  w.manifest["inputs"]["dataset"] = sha256_hex(read_file(config.dataset));
  if (!config.foreign.empty()) w.manifest["inputs"]["foreign"] = sha256_hex(read_file(config.foreign));
  w.manifest["artifacts"] = json::object();
  w.manifest["warnings"] = json::array();
  for (const char* stage : {"perturb", "filter.topics", "filter.scorer_init", "filter.scorer_train"}) {
    w.manifest["stage_seeds"][stage] = stage_seed(seed, stage);
  }
  json& counts = w.manifest["counts"];

  std::string stage = "load";
  try {
    LoadReport report;
    const Dataset dataset = load_input(config, &report);
    std::size_t triples = 0;
    for (const auto& inst : dataset) triples += inst.triples.size();
    counts["sentences"] = dataset.size();
    counts["triples"] = triples;
    counts["rejected_too_long"] = report.rejected_too_long;
    counts["skipped_triples"] = report.skipped_triples;
    for (const auto& msg : report.warnings) w.manifest["warnings"].push_back(msg);

    stage = "provider";
    const auto provider = make_provider(config.provider);
    w.manifest["provider"] = provider->name();

    stage = "discretize";
    const BlocksFile blocks = stage_discretize(dataset, config.context_width, config.split_mode);
    std::size_t block_count = 0;
    for (const auto& [key, list] : blocks.library) block_count += list.size();
    counts["blocks"] = block_count;
    counts["groups"] = blocks.library.size();
    counts["skipped_blocks"] = blocks.skipped.size();
    w.artifact("blocks.json", blocks_to_json(blocks));

    stage = "match";
    MatchOptions match;
    match.weights = config.weights;
    match.floor = config.floor;
    match.per_group_cap = config.per_group_cap;
    match.threads = config.threads;
    const QueueMap queues = stage_match(blocks, *provider, match);
    counts["candidates"] = total_candidates(queues);
    w.artifact("queues.json", queues_to_json(queues, match));

    stage = "augment";
    AugmentStats stats;
    const auto augmented = augment_dataset(dataset, queues, config.policy, &stats);
    counts["proposals"] = stats.proposals;
    counts["augmented"] = augmented.size();
    counts["discarded"] = stats.discarded;
    w.artifact("augmented.jsonl", augmented_to_jsonl(augmented));

    stage = "filter";
    const FilterOutcome filtered = stage_filter(dataset, augmented, *provider, config.filter, seed, config.threads);
    counts["coherence_dropped"] = filtered.counts.coherence_dropped;
    counts["topic_dropped"] = filtered.counts.topic_dropped;
    counts["zeta_dropped"] = filtered.counts.zeta_dropped;
    counts["filtered"] = filtered.counts.kept;
    for (const auto& msg : filtered.warnings) w.manifest["warnings"].push_back(msg);
    w.artifact("consistency.json", consistency_to_json(filtered.ranking));
    w.artifact("scorer.bin", filtered.scorer_blob);
    w.artifact("filtered.jsonl", augmented_to_jsonl(filtered.kept));

    stage = "report";
    Dataset final_set;
    if (config.append) {
      final_set = append_augmented(dataset, filtered.kept);
    } else {
      for (const auto& a : filtered.kept) final_set.push_back(a.as_instance());
    }
    counts["final"] = final_set.size();
    w.artifact("final.jsonl", dataset_to_jsonl(final_set));
    if (auto* cached = dynamic_cast<const CachedEmbedder*>(provider.get())) cached->flush();
  } catch (const Error& e) {
    w.manifest["status"] = "failed";
    w.manifest["failed_stage"] = stage;
    w.manifest["error"] = e.what();
    w.finish(start);
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    const Error wrapped(ErrorKind::io, e.what());
    w.manifest["status"] = "failed";
    w.manifest["failed_stage"] = stage;
    w.manifest["error"] = e.what();
    w.finish(start);
    throw StageError(stage, wrapped);
  }
  w.manifest["status"] = "ok";
  w.finish(start);
  return RunResult{w.manifest, w.hashes};
}

}  // namespace ssdau
