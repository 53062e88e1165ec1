#include "ssdau/serialize.hpp"

#include <map>

#include <json.hpp>

#include "ssdau/error.hpp"

namespace ssdau {

using nlohmann::json;

namespace {

Role role_from(const json& j) {
  const auto r = parse_role(j.get<std::string>());
  if (!r) throw Error(ErrorKind::parse, "unknown role " + j.dump());
  return *r;
}

json key_json(const GroupKey& k) {
  return json{{"role", to_string(k.role)}, {"relation", k.relation}, {"entity_tag", k.entity_tag}};
}

GroupKey key_from(const json& j) {
  return GroupKey{role_from(j.at("role")), j.at("relation").get<std::string>(),
                  j.at("entity_tag").get<std::string>()};
}

json block_json(const TextBlock& b) {
  return json{{"span_text", b.span_text},
              {"role", to_string(b.role)},
              {"label_tag", b.label_tag},
              {"context_tokens", b.context_tokens},
              {"left_context", b.left_context},
              {"cut", {b.cut.token_start, b.cut.token_end}},
              {"source_sentence", b.source_sentence},
              {"source_triple", b.source_triple},
              {"relation", b.relation},
              {"group", key_json(b.group)}};
}

TextBlock block_from(const json& j) {
  TextBlock b;
  b.span_text = j.at("span_text").get<std::string>();
  b.role = role_from(j.at("role"));
  b.label_tag = j.at("label_tag").get<std::string>();
  b.context_tokens = j.at("context_tokens").get<std::vector<std::string>>();
  b.left_context = j.at("left_context").get<std::size_t>();
  b.cut = Cut{j.at("cut").at(0).get<std::size_t>(), j.at("cut").at(1).get<std::size_t>()};
  b.source_sentence = j.at("source_sentence").get<std::string>();
  b.source_triple = j.at("source_triple").get<std::size_t>();
  b.relation = j.at("relation").get<std::string>();
  b.group = key_from(j.at("group"));
  return b;
}

json ref_json(const BlockRef& r) {
  return json{{"sentence_id", r.sentence_id}, {"triple_index", r.triple_index}, {"role", to_string(r.role)}};
}

BlockRef ref_from(const json& j) {
  return BlockRef{j.at("sentence_id").get<std::string>(), j.at("triple_index").get<std::size_t>(),
                  role_from(j.at("role"))};
}

json components_json(const ComponentScores& c) {
  return json{{"semantic", c.semantic},
              {"syntactic", c.syntactic},
              {"lexical", c.lexical},
              {"context", c.context},
              {"contextual_embedding", c.contextual_embedding}};
}

ComponentScores components_from(const json& j) {
  return ComponentScores{j.at("semantic").get<double>(), j.at("syntactic").get<double>(),
                         j.at("lexical").get<double>(), j.at("context").get<double>(),
                         j.at("contextual_embedding").get<double>()};
}

json parse_or_throw(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("bad ") + what + ": " + e.what());
  }
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("bad ") + what + ": " + e.what());
  }
}

}  // namespace

std::string blocks_to_json(const BlocksFile& file) {
  json sentences = json::array();
  for (const auto& [id, s] : file.sentences) sentences.push_back(json{{"id", id}, {"text", s.text}});
  json groups = json::array();
  for (const auto& [key, blocks] : file.library) {
    json list = json::array();
    for (const auto& b : blocks) list.push_back(block_json(b));
    groups.push_back(json{{"key", key_json(key)}, {"label", to_string(key)}, {"blocks", list}});
  }
  json doc{{"format", "ssdau-blocks"},
           {"version", 1},
           {"context_width", file.context_width},
           {"split_mode", to_string(file.split_mode)},
           {"sentences", sentences},
           {"groups", groups},
           {"skipped", file.skipped}};
  return doc.dump(1) + "\n";
}

BlocksFile blocks_from_json(std::string_view text) {
  const json doc = parse_or_throw(text, "blocks file");
  return guarded("blocks file", [&] {
    if (doc.at("format") != "ssdau-blocks") throw Error(ErrorKind::parse, "not a blocks file");
    BlocksFile f;
    f.context_width = doc.at("context_width").get<std::size_t>();
    const auto mode = parse_split_mode(doc.at("split_mode").get<std::string>());
    if (!mode) throw Error(ErrorKind::parse, "unknown split mode");
    f.split_mode = *mode;
    for (const auto& s : doc.at("sentences")) {
      auto id = s.at("id").get<std::string>();
      f.sentences.emplace(id, make_sentence(id, s.at("text").get<std::string>()));
    }
    for (const auto& g : doc.at("groups")) {
      auto& list = f.library[key_from(g.at("key"))];
      for (const auto& b : g.at("blocks")) list.push_back(block_from(b));
    }
    f.skipped = doc.value("skipped", std::vector<std::string>{});
    return f;
  });
}

std::string queues_to_json(const QueueMap& queues, const MatchOptions& options) {
  // Blocks are stored once and entries point at them by index.
  std::map<BlockRef, std::size_t> slot;
  json blocks = json::array();
  auto index_of = [&](const TextBlock& b) {
    auto [it, fresh] = slot.emplace(b.ref(), slot.size());
    if (fresh) blocks.push_back(block_json(b));
    return it->second;
  };
  json groups = json::array();
  for (const auto& [key, q] : queues) {
    json entries = json::array();
    for (const auto& c : q.entries) {
      entries.push_back(json{{"source", index_of(c.source)},
                             {"replacement", index_of(c.replacement)},
                             {"components", components_json(c.components)},
                             {"hybrid", c.hybrid}});
    }
    groups.push_back(json{{"key", key_json(key)}, {"label", to_string(key)}, {"entries", entries}});
  }
  const auto& w = options.weights;
  json doc{{"format", "ssdau-queues"},
           {"version", 2},
           {"floor", options.floor},
           {"per_group_cap", options.per_group_cap},
           {"weights",
            {{"semantic", w.semantic},
             {"syntactic", w.syntactic},
             {"lexical", w.lexical},
             {"context", w.context},
             {"contextual_embedding", w.contextual_embedding}}},
           {"blocks", blocks},
           {"groups", groups}};
  return doc.dump() + "\n";
}

QueueMap queues_from_json(std::string_view text) {
  const json doc = parse_or_throw(text, "queues file");
  return guarded("queues file", [&] {
    if (doc.at("format") != "ssdau-queues" || doc.at("version") != 2) {
      throw Error(ErrorKind::parse, "not a version 2 queues file");
    }
    std::vector<TextBlock> blocks;
    for (const auto& b : doc.at("blocks")) blocks.push_back(block_from(b));
    auto block = [&](const json& j) -> const TextBlock& {
      const auto i = j.get<std::size_t>();
      if (i >= blocks.size()) throw Error(ErrorKind::parse, "queue entry points past the block table");
      return blocks[i];
    };
    QueueMap out;
    for (const auto& g : doc.at("groups")) {
      const GroupKey key = key_from(g.at("key"));
      CandidateQueue q{key, {}};
      for (const auto& e : g.at("entries")) {
        q.entries.push_back(MatchCandidate{block(e.at("source")), block(e.at("replacement")),
                                           components_from(e.at("components")), e.at("hybrid").get<double>()});
      }
      out.emplace(key, std::move(q));
    }
    return out;
  });
}

std::string augmented_to_jsonl(const std::vector<AugmentedInstance>& instances) {
  std::string out;
  for (const auto& a : instances) {
    std::string line = dataset_to_jsonl({a.as_instance()});
    json rec = json::parse(line);
    const auto& p = a.provenance;
    std::vector<std::string> roles;
    for (Role r : p.replaced_roles) roles.push_back(to_string(r));
    json sources = json::array();
    for (const auto& r : p.replacement_sources) sources.push_back(ref_json(r));
    rec["provenance"] = json{{"source_id", p.source_id},
                             {"mode", to_string(p.mode)},
                             {"replaced_roles", roles},
                             {"triple_indices", p.triple_indices},
                             {"theta", p.theta},
                             {"replacement_sources", sources}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<AugmentedInstance> augmented_from_jsonl(std::string_view text) {
  LoadOptions options;
  options.max_tokens = std::numeric_limits<std::size_t>::max();
  options.unknown_relations = UnknownRelationPolicy::skip;
  Dataset dataset = parse_dataset(text, InputFormat::jsonl, options).dataset;
  std::vector<AugmentedInstance> out;
  std::size_t pos = 0, index = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const json rec = parse_or_throw(line, "augmented record");
    if (index >= dataset.size()) throw Error(ErrorKind::parse, "augmented record count mismatch");
    AugmentedInstance a;
    a.sentence = std::move(dataset[index].sentence);
    a.triples = std::move(dataset[index].triples);
    ++index;
    if (rec.contains("provenance")) {
      guarded("provenance", [&] {
        const json& p = rec.at("provenance");
        a.provenance.source_id = p.at("source_id").get<std::string>();
        const auto mode = parse_augment_mode(p.at("mode").get<std::string>());
        if (!mode) throw Error(ErrorKind::parse, "unknown augment mode in provenance");
        a.provenance.mode = *mode;
        for (const auto& r : p.at("replaced_roles")) a.provenance.replaced_roles.push_back(role_from(r));
        a.provenance.triple_indices = p.at("triple_indices").get<std::vector<std::size_t>>();
        a.provenance.theta = p.at("theta").get<std::vector<double>>();
        for (const auto& r : p.at("replacement_sources")) a.provenance.replacement_sources.push_back(ref_from(r));
        return 0;
      });
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string consistency_to_json(const std::vector<ConsistencyResult>& results) {
  json arr = json::array();
  for (const auto& r : results) {
    arr.push_back(json{{"id", r.id}, {"zeta", r.zeta}, {"rank", r.rank}, {"kept", r.kept}});
  }
  return arr.dump(1) + "\n";
}

}  // namespace ssdau
