// ssdau command-line front end. Reports go to stdout as JSON, artifacts to
// files. Exit codes: 0 success, 2 validation error, 3 stage failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "ssdau/augment.hpp"
#include "ssdau/corpus.hpp"
#include "ssdau/evaluate.hpp"
#include "ssdau/pipeline.hpp"
#include "ssdau/serialize.hpp"
#include "ssdau/util.hpp"

using nlohmann::json;
using namespace ssdau;

namespace {

constexpr int kValidationError = 2;
constexpr int kStageFailure = 3;

struct ProviderFlags {
  std::string kind = "deterministic_test";
  std::size_t dimension = 64;
  std::string endpoint;
  std::string cache_dir;
  std::string cache_backend = "auto";
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--provider", kind, "deterministic_test | service | file_cache");
    app->add_option("--dim", dimension, "embedding dimension");
    app->add_option("--endpoint", endpoint, "embedding service URL");
    app->add_option("--cache-dir", cache_dir, "file cache directory");
    app->add_option("--cache-backend", cache_backend, "auto | service | test | none");
    app->add_option("--provider-seed", seed, "seed of the test embedder");
  }

  ProviderConfig config() const {
    ProviderConfig c;
    const auto k = parse_provider_kind(kind);
    if (!k) throw Error(ErrorKind::config, "unknown provider kind: " + kind);
    c.kind = *k;
    c.dimension = dimension;
    c.endpoint = endpoint;
    c.cache_dir = cache_dir;
    c.cache_backend = cache_backend;
    c.seed = seed;
    return c;
  }
};

struct LoadFlags {
  std::string path;
  std::string format = "jsonl";
  std::size_t max_tokens = 128;
  std::string unknown = "fail";

  void add(CLI::App* app, const char* name = "dataset") {
    app->add_option(name, path, "input dataset")->required()->check(CLI::ExistingFile);
    add_options(app);
  }
  void add_options(CLI::App* app) {
    app->add_option("--format", format, "jsonl | nyt_json | webnlg_json");
    app->add_option("--max-tokens", max_tokens, "reject sentences longer than this");
    app->add_option("--unknown-relations", unknown, "fail | skip");
  }

  LoadResult load(const std::optional<RelationSchema>& schema = std::nullopt) const {
    const auto f = parse_input_format(format);
    if (!f) throw Error(ErrorKind::config, "unknown format: " + format);
    LoadOptions o;
    o.max_tokens = max_tokens;
    if (unknown == "skip") {
      o.unknown_relations = UnknownRelationPolicy::skip;
    } else if (unknown != "fail") {
      throw Error(ErrorKind::config, "unknown relation policy: " + unknown);
    }
    o.schema = schema;
    return load_dataset(path, *f, o);
  }
};

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config:
    case ErrorKind::parse:
    case ErrorKind::alignment:
    case ErrorKind::schema:
      return kValidationError;
    default:
      return kStageFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-aware data augmentation for triple-annotated corpora"};
  app.require_subcommand(1);

  // load-check
  LoadFlags lc;
  std::string schema_path;
  auto* load_check = app.add_subcommand("load-check", "validate a dataset and report counts");
  lc.add(load_check);
  load_check->add_option("--schema", schema_path, "dataset whose relations form the schema")->check(CLI::ExistingFile);

  // discretize
  LoadFlags dz;
  std::size_t context_width = kDefaultContextWidth;
  std::string split_mode = "labeled";
  std::string blocks_out;
  auto* discretize = app.add_subcommand("discretize", "split sentences into text blocks");
  dz.add(discretize);
  discretize->add_option("--context-width", context_width);
  discretize->add_option("--split-mode", split_mode, "labeled | no_label | full");
  discretize->add_option("--out", blocks_out)->required();

  // embed-warm
  LoadFlags ew;
  ProviderFlags ew_provider;
  std::string warm_cache;
  auto* embed_warm = app.add_subcommand("embed-warm", "precompute sentence embeddings into a cache");
  ew.add(embed_warm);
  ew_provider.add(embed_warm);
  embed_warm->add_option("--cache", warm_cache, "cache directory")->required();

  // match
  std::string blocks_in, queues_out, weights = "1,1,1,1,1";
  double floor = 0.0;
  std::size_t cap = 5000, threads = 1;
  ProviderFlags m_provider;
  auto* match = app.add_subcommand("match", "score block pairs into candidate queues");
  match->add_option("blocks", blocks_in)->required()->check(CLI::ExistingFile);
  match->add_option("--floor", floor);
  match->add_option("--weights", weights, "semantic,syntactic,lexical,context,contextual");
  match->add_option("--cap", cap, "per-group queue cap");
  match->add_option("--threads", threads);
  match->add_option("--out", queues_out)->required();
  m_provider.add(match);

  // augment
  LoadFlags ag;
  std::string queues_in, aug_out, mode = "hrt";
  double epsilon = 0.7;
  std::optional<double> eps_entity, eps_relation;
  std::size_t max_per_sentence = 3;
  auto* augment = app.add_subcommand("augment", "apply queued replacements");
  ag.add(augment);
  augment->add_option("--queues", queues_in)->required()->check(CLI::ExistingFile);
  augment->add_option("--mode", mode, "hrt | h | t | r | ht | hrh | trt");
  augment->add_option("--epsilon", epsilon);
  augment->add_option("--epsilon-entity", eps_entity);
  augment->add_option("--epsilon-relation", eps_relation);
  augment->add_option("--max-per-sentence", max_per_sentence);
  augment->add_option("--out", aug_out)->required();

  // filter
  LoadFlags fl;
  std::string aug_in, filtered_out, ranking_out, scorer_out, order = "topic_first";
  FilterConfig fcfg;
  std::uint64_t filter_seed = 0;
  std::size_t filter_threads = 1;
  ProviderFlags f_provider;
  auto* filter = app.add_subcommand("filter", "coherence, topic and consistency filtering");
  filter->add_option("augmented", aug_in)->required()->check(CLI::ExistingFile);
  filter->add_option("--dataset", fl.path, "source dataset")->required()->check(CLI::ExistingFile);
  fl.add_options(filter);
  filter->add_option("--keep", fcfg.keep_fraction);
  filter->add_option("--topics", fcfg.k_topics);
  filter->add_option("--min-affinity", fcfg.min_affinity);
  filter->add_option("--nu-floor", fcfg.nu_floor);
  filter->add_option("--order", order, "topic_first | zeta_first");
  filter->add_option("--hidden-dim", fcfg.hidden_dim);
  filter->add_option("--ridge", fcfg.ridge);
  filter->add_option("--epochs", fcfg.epochs);
  filter->add_option("--learning-rate", fcfg.learning_rate);
  filter->add_option("--dropout", fcfg.dropout_rate);
  filter->add_option("--max-span-length", fcfg.max_span_length);
  filter->add_option("--seed", filter_seed)->required();
  filter->add_option("--threads", filter_threads);
  filter->add_option("--out", filtered_out)->required();
  filter->add_option("--ranking-out", ranking_out, "write the zeta ranking as JSON");
  filter->add_option("--scorer-out", scorer_out, "write the trained scorer blob");
  f_provider.add(filter);

  // eval
  LoadFlags ev_pred, ev_gold;
  std::string match_mode = "exact";
  bool macro = false;
  auto* eval = app.add_subcommand("eval", "triple-level precision, recall, F1 and IoU");
  eval->add_option("--pred", ev_pred.path)->required()->check(CLI::ExistingFile);
  eval->add_option("--gold", ev_gold.path)->required()->check(CLI::ExistingFile);
  eval->add_option("--format", ev_gold.format);
  eval->add_option("--mode", match_mode, "exact | partial");
  eval->add_flag("--macro", macro, "average per sentence instead of pooling");

  // sweep
  LoadFlags sw;
  std::string sweep_queues, bins = "0.5:1.0:0.1", dataset_name = "dataset";
  bool table_only = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "augmented counts per similarity bin");
  sw.add(sweep_cmd);
  sweep_cmd->add_option("--queues", sweep_queues)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--bins", bins, "lo:hi:step");
  sweep_cmd->add_option("--name", dataset_name);
  sweep_cmd->add_flag("--table", table_only, "print only the aligned text table");

  // augment-all
  std::string config_path, out_dir;
  std::optional<std::uint64_t> run_seed;
  auto* all = app.add_subcommand("augment-all", "run every stage from one JSON config");
  all->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  all->add_option("--seed", run_seed, "override the config seed");
  all->add_option("--out", out_dir, "override the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kValidationError;
  }

  try {
    if (*load_check) {
      std::optional<RelationSchema> schema;
      if (!schema_path.empty()) {
        LoadFlags s = lc;
        s.path = schema_path;
        schema = RelationSchema::from_dataset(s.load().dataset);
      }
      LoadFlags tolerant = lc;
      tolerant.unknown = "skip";
      const LoadResult r = tolerant.load(schema);
      const auto& rep = r.report;
      json out{{"records", rep.records},
               {"sentences", rep.sentences},
               {"triples", rep.triples},
               {"rejected_too_long", rep.rejected_too_long},
               {"skipped_triples", rep.skipped_triples},
               {"first_match_resolutions", rep.first_match_resolutions},
               {"unknown_relations", rep.unknown_relations},
               {"relations", RelationSchema::from_dataset(r.dataset).relations()},
               {"warnings", rep.warnings}};
      const bool ok = rep.unknown_relations.empty() || lc.unknown == "skip";
      out["ok"] = ok;
      print(out);
      return ok ? 0 : kValidationError;
    }
    if (*discretize) {
      const auto sm = parse_split_mode(split_mode);
      if (!sm) throw Error(ErrorKind::config, "unknown split mode: " + split_mode);
      const Dataset d = dz.load().dataset;
      const BlocksFile blocks = stage_discretize(d, context_width, *sm);
      const std::string text = blocks_to_json(blocks);
      write_file(blocks_out, text);
      std::size_t n = 0;
      for (const auto& [k, v] : blocks.library) n += v.size();
      print({{"blocks", n}, {"groups", blocks.library.size()}, {"skipped", blocks.skipped.size()},
             {"out", blocks_out}, {"sha256", sha256_hex(text)}});
      return 0;
    }
    if (*embed_warm) {
      ProviderConfig pc = ew_provider.config();
      pc.kind = ProviderKind::file_cache;
      pc.cache_dir = warm_cache;
      const auto provider = make_provider(pc);
      const Dataset d = ew.load().dataset;
      for (const auto& inst : d) provider->embed(inst.sentence);
      const auto& cached = dynamic_cast<const CachedEmbedder&>(*provider);
      cached.flush();
      print({{"sentences", d.size()}, {"entries", cached.entries()}, {"hits", cached.hits()},
             {"misses", cached.misses()}, {"cache", warm_cache}, {"provider", cached.name()}});
      return 0;
    }
    if (*match) {
      const BlocksFile blocks = blocks_from_json(read_file(blocks_in));
      MatchOptions o;
      o.weights = SimilarityWeights::parse(weights);
      o.weights.validate();
      if (!(floor >= 0.0 && floor <= 1.0)) throw Error(ErrorKind::config, "floor must lie in [0, 1]");
      o.floor = floor;
      o.per_group_cap = cap;
      o.threads = threads;
      const auto provider = make_provider(m_provider.config());
      const QueueMap queues = stage_match(blocks, *provider, o);
      const std::string text = queues_to_json(queues, o);
      write_file(queues_out, text);
      if (auto* c = dynamic_cast<const CachedEmbedder*>(provider.get())) c->flush();
      print({{"groups", queues.size()}, {"candidates", total_candidates(queues)}, {"out", queues_out},
             {"sha256", sha256_hex(text)}});
      return 0;
    }
    if (*augment) {
      AugmentPolicy policy;
      const auto m = parse_augment_mode(mode);
      if (!m) throw Error(ErrorKind::config, "unknown mode: " + mode);
      policy.mode = *m;
      policy.epsilon = epsilon;
      policy.epsilon_entity = eps_entity;
      policy.epsilon_relation = eps_relation;
      policy.max_per_sentence = max_per_sentence;
      policy.validate();
      const Dataset d = ag.load().dataset;
      const QueueMap queues = queues_from_json(read_file(queues_in));
      AugmentStats stats;
      const auto out = augment_dataset(d, queues, policy, &stats);
      const std::string text = augmented_to_jsonl(out);
      write_file(aug_out, text);
      print({{"proposals", stats.proposals}, {"produced", stats.produced}, {"discarded", stats.discarded},
             {"out", aug_out}, {"sha256", sha256_hex(text)}});
      return 0;
    }
    if (*filter) {
      if (order == "zeta_first") {
        fcfg.order = FilterOrder::zeta_first;
      } else if (order != "topic_first") {
        throw Error(ErrorKind::config, "unknown filter order: " + order);
      }
      if (!(fcfg.keep_fraction > 0.0 && fcfg.keep_fraction <= 1.0)) {
        throw Error(ErrorKind::config, "keep fraction must lie in (0, 1]");
      }
      const Dataset sources = fl.load().dataset;
      const auto augmented = augmented_from_jsonl(read_file(aug_in));
      const auto provider = make_provider(f_provider.config());
      const FilterOutcome r = stage_filter(sources, augmented, *provider, fcfg, filter_seed, filter_threads);
      const std::string text = augmented_to_jsonl(r.kept);
      write_file(filtered_out, text);
      if (!ranking_out.empty()) write_file(ranking_out, consistency_to_json(r.ranking));
      if (!scorer_out.empty()) write_file(scorer_out, r.scorer_blob);
      if (auto* c = dynamic_cast<const CachedEmbedder*>(provider.get())) c->flush();
      print({{"input", r.counts.input},
             {"coherence_dropped", r.counts.coherence_dropped},
             {"topic_dropped", r.counts.topic_dropped},
             {"zeta_dropped", r.counts.zeta_dropped},
             {"kept", r.counts.kept},
             {"warnings", r.warnings},
             {"out", filtered_out},
             {"sha256", sha256_hex(text)}});
      return 0;
    }
    if (*eval) {
      const auto mm = parse_match_mode(match_mode);
      if (!mm) throw Error(ErrorKind::config, "unknown match mode: " + match_mode);
      ev_pred.format = ev_gold.format;
      ev_pred.unknown = ev_gold.unknown = "skip";
      const Dataset pred = ev_pred.load().dataset;
      const Dataset gold = ev_gold.load().dataset;
      const Metrics m = evaluate_datasets(pred, gold, *mm, macro);
      print({{"mode", to_string(*mm)},
             {"average", macro ? "macro" : "micro"},
             {"precision", m.precision},
             {"recall", m.recall},
             {"f1", m.f1},
             {"iou", m.iou}});
      return 0;
    }
    if (*sweep_cmd) {
      const auto parsed_bins = parse_bins(bins);
      const Dataset d = sw.load().dataset;
      const QueueMap queues = queues_from_json(read_file(sweep_queues));
      const SweepReport report = sweep(dataset_name, d, queues, AugmentPolicy{}, parsed_bins);
      if (table_only) {
        std::cout << report.render();
        return 0;
      }
      json rows = json::array();
      for (const auto& r : report.rows) {
        rows.push_back({{"dataset", r.dataset}, {"bin", r.bin.label()}, {"lo", r.bin.lo}, {"hi", r.bin.hi},
                        {"head", r.head}, {"relation", r.relation}, {"tail", r.tail}, {"sum", r.sum()}});
      }
      print({{"rows", rows}, {"table", report.render()}});
      return 0;
    }
    if (*all) {
      RunConfig cfg = load_run_config(config_path);
      if (run_seed) cfg.seed = run_seed;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      try {
        cfg.validate();
      } catch (const Error& e) {
        std::cerr << "ssdau: " << e.what() << "\n";
        return kValidationError;
      }
      const RunResult r = run_pipeline(cfg);
      print(r.manifest);
      return 0;
    }
  } catch (const StageError& e) {
    std::cerr << "ssdau: " << e.what() << "\n";
    return kStageFailure;
  } catch (const Error& e) {
    std::cerr << "ssdau: " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "ssdau: " << e.what() << "\n";
    return kStageFailure;
  }
  return 0;
}
