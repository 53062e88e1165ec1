#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "ssdau/pipeline.hpp"
#include "ssdau/util.hpp"

using namespace ssdau;
using nlohmann::json;
namespace fs = std::filesystem;
using ssdau::testing::data_path;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ssdau-pipe-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

RunConfig fixture_config(const fs::path& out, std::size_t threads = 1) {
  RunConfig c;
  c.dataset = data_path("fixture_corpus.jsonl");
  c.seed = 42;
  c.output_dir = out.string();
  c.threads = threads;
  c.provider.dimension = 32;
  c.filter.epochs = 10;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("run configuration round trips through JSON") {
  RunConfig c = fixture_config("/tmp/x");
  c.policy.mode = AugmentMode::ht_only;
  c.policy.epsilon_relation = 0.9;
  c.weights = SimilarityWeights{1, 2, 3, 4, 5};
  c.filter.order = FilterOrder::zeta_first;
  c.split_mode = SplitMode::no_label;
  const json j = to_json(c);
  const RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.policy.epsilon_relation == 0.9);
  CHECK(back.weights.contextual_embedding == 5.0);

  json extra = j;
  extra["surprise"] = 1;
  CHECK_THROWS_AS(run_config_from_json(extra), Error);
  json nested = j;
  nested["filter"]["bogus"] = true;
  CHECK_THROWS_AS(run_config_from_json(nested), Error);
  const RunConfig minimal = run_config_from_json(json{{"dataset", "d.jsonl"}, {"seed", 1}, {"weights", "1,1,1,1,2"}});
  CHECK(minimal.weights.contextual_embedding == 2.0);
  CHECK(minimal.filter.keep_fraction == 0.8);
}

TEST_CASE("validation catches missing seeds and bad ranges") {
  RunConfig c = fixture_config(scratch("validate"));
  CHECK_NOTHROW(c.validate());
  c.seed.reset();
  CHECK_THROWS_AS(c.validate(), Error);
  c.seed = 1;
  c.filter.keep_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.filter.keep_fraction = 0.5;
  c.dataset = "/nonexistent/file.jsonl";
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("stage seeds are distinct and stable") {
  CHECK(stage_seed(1, "perturb") == stage_seed(1, "perturb"));
  CHECK(stage_seed(1, "perturb") != stage_seed(2, "perturb"));
  CHECK(stage_seed(1, "perturb") != stage_seed(1, "filter.topics"));
}

TEST_CASE("empty dataset runs cleanly with zero counts") {
  const auto dir = scratch("empty");
  fs::create_directories(dir);
  { std::ofstream(dir / "empty.jsonl"); }
  RunConfig c = fixture_config(dir / "out");
  c.dataset = (dir / "empty.jsonl").string();
  const auto r = run_pipeline(c);
  CHECK(r.manifest["status"] == "ok");
  CHECK(r.manifest["counts"]["augmented"] == 0);
  CHECK(r.manifest["counts"]["filtered"] == 0);
  CHECK(r.manifest["counts"]["final"] == 0);
  fs::remove_all(dir);
}

TEST_CASE("fixture run is deterministic and artifacts nest through provenance") {
  const auto a = scratch("a"), b = scratch("b");
  const auto ra = run_pipeline(fixture_config(a));
  const auto rb = run_pipeline(fixture_config(b));
  CHECK(ra.artifact_hashes == rb.artifact_hashes);
  CHECK(ra.manifest["artifact_digest"] == rb.manifest["artifact_digest"]);
  CHECK(ra.manifest["status"] == "ok");
  for (const char* name : {"blocks.json", "queues.json", "augmented.jsonl", "consistency.json", "scorer.bin",
                           "filtered.jsonl", "final.jsonl", "manifest.json"}) {
    CHECK(fs::exists(a / name));
  }
  CHECK(ra.artifact_hashes.at("augmented.jsonl") == sha256_hex(slurp(a / "augmented.jsonl")));

  const Dataset originals = ssdau::testing::fixture_corpus();
  const auto augmented = augmented_from_jsonl(slurp(a / "augmented.jsonl"));
  const auto filtered = augmented_from_jsonl(slurp(a / "filtered.jsonl"));
  const auto queues = queues_from_json(slurp(a / "queues.json"));
  REQUIRE_FALSE(augmented.empty());
  REQUIRE_FALSE(filtered.empty());
  CHECK(filtered.size() <= augmented.size());

  // filtered is a subsequence of augmented
  std::size_t pos = 0;
  for (const auto& f : filtered) {
    while (pos < augmented.size() && augmented[pos].sentence.id != f.sentence.id) ++pos;
    REQUIRE(pos < augmented.size());
    CHECK(augmented[pos].sentence.text == f.sentence.text);
    ++pos;
  }
  // every replacement step corresponds to a queued candidate
  std::set<std::pair<BlockRef, BlockRef>> candidates;
  for (const auto& [key, q] : queues) {
    for (const auto& c : q.entries) candidates.emplace(c.source.ref(), c.replacement.ref());
  }
  for (const auto& aug : augmented) {
    const auto& p = aug.provenance;
    for (std::size_t s = 0; s < p.replaced_roles.size(); ++s) {
      const BlockRef src{p.source_id, p.triple_indices[s], p.replaced_roles[s]};
      CHECK(candidates.count({src, p.replacement_sources[s]}) == 1);
    }
  }

  // final = originals verbatim, then the filtered instances
  const auto final_set = load_dataset((a / "final.jsonl").string(), InputFormat::jsonl).dataset;
  REQUIRE(final_set.size() == originals.size() + filtered.size());
  for (std::size_t i = 0; i < originals.size(); ++i) CHECK(final_set[i] == originals[i]);
  for (std::size_t i = 0; i < filtered.size(); ++i) CHECK(final_set[originals.size() + i] == filtered[i].as_instance());
  CHECK(ra.manifest["counts"]["final"] == final_set.size());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("thread count does not change artifacts") {
  const auto a = scratch("t1"), b = scratch("t3");
  const auto r1 = run_pipeline(fixture_config(a, 1));
  const auto r3 = run_pipeline(fixture_config(b, 3));
  for (const auto& [name, hash] : r1.artifact_hashes) {
    if (name == "manifest.json") continue;
    CHECK_MESSAGE(r3.artifact_hashes.at(name) == hash, name);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("a failing stage records itself in the manifest") {
  const auto dir = scratch("fail");
  fs::create_directories(dir);
  { std::ofstream(dir / "bad.jsonl") << "{not json\n"; }
  RunConfig c = fixture_config(dir / "out");
  c.dataset = (dir / "bad.jsonl").string();
  try {
    run_pipeline(c);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "load");
    CHECK(e.kind() == ErrorKind::parse);
  }
  const json m = json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(m["status"] == "failed");
  CHECK(m["failed_stage"] == "load");
  fs::remove_all(dir);
}

TEST_CASE("append keeps originals untouched") {
  const Dataset d = ssdau::testing::fixture_corpus();
  std::vector<AugmentedInstance> kept{AugmentedInstance{d[0].sentence, d[0].triples, {}}};
  kept[0].sentence.id = "new";
  const auto out = append_augmented(d, kept);
  REQUIRE(out.size() == d.size() + 1);
  CHECK(std::equal(d.begin(), d.end(), out.begin()));
  CHECK(out.back().sentence.id == "new");
}
