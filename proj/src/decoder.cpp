#include "lmdx/decoder.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "lmdx/error.hpp"

namespace lmdx {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Returns one-past-the-end of an identifier starting at i, or npos. Coordinate
// identifiers must not touch adjacent digits, so "123|45" contains none.
std::size_t match_identifier(const std::string& v, std::size_t i,
                             IdentifierStyle style, int width) {
  const std::size_t n = v.size();
  if (style == IdentifierStyle::line_index) {
    if (v[i] != '<') return std::string::npos;
    std::size_t j = i + 1;
    while (j < n && is_ascii_digit(v[j])) ++j;
    if (j == i + 1 || j >= n || v[j] != '>') return std::string::npos;
    return j + 1;
  }
  const int groups = style == IdentifierStyle::center_2 ? 2 : 4;
  const std::size_t w = static_cast<std::size_t>(width);
  std::size_t j = i;
  for (int g = 0; g < groups; ++g) {
    if (g > 0) {
      if (j >= n || v[j] != '|') return std::string::npos;
      ++j;
    }
    for (std::size_t k = 0; k < w; ++k, ++j) {
      if (j >= n || !is_ascii_digit(v[j])) return std::string::npos;
    }
  }
  if (i > 0 && is_ascii_digit(v[i - 1])) return std::string::npos;
  if (j < n && is_ascii_digit(v[j])) return std::string::npos;
  return j;
}

// Subtree identity that ignores identifiers and boxes: used where values from
// different chunks (whose line ordinals never agree) must be compared.
void text_canonical_rec(const GroundedEntity& e, std::string& out) {
  out += e.is_leaf() ? 'L' : 'H';
  for (const auto& p : e.type_path) {
    out += p;
    out += '\x1f';
  }
  out += '\x1e';
  if (e.value_text) out += collapse_whitespace(*e.value_text);
  out += '\x1d';
  for (const auto& c : e.children) {
    text_canonical_rec(c, out);
    out += '\x1c';
  }
}

std::string text_canonical(const GroundedEntity& e) {
  std::string s;
  text_canonical_rec(e, s);
  return s;
}

// Most frequent by text identity; first occurrence wins ties.
GroundedEntity resolve_most_frequent(std::vector<GroundedEntity> items) {
  std::map<std::string, int> counts;
  std::vector<std::string> keys;
  keys.reserve(items.size());
  for (const auto& e : items) {
    keys.push_back(text_canonical(e));
    ++counts[keys.back()];
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < items.size(); ++i) {
    if (counts[keys[i]] > counts[keys[best]]) best = i;
  }
  return std::move(items[best]);
}

void count_discard(DecodeCounters& counters, DiscardReason reason) {
  switch (reason) {
    case DiscardReason::invalid_value_format:
      ++counters.invalid_value_format;
      break;
    case DiscardReason::hallucinated_segment:
    case DiscardReason::text_not_found:
      ++counters.text_not_found;
      break;
  }
}

}  // namespace

ChunkContext make_chunk_context(const DocumentChunk& chunk,
                                const CoordinateScheme& scheme) {
  ChunkContext ctx;
  ctx.chunk = &chunk;
  ctx.scheme = scheme;
  ctx.id_map = render_document_section(chunk, scheme).id_map;
  return ctx;
}

std::optional<json> parse_completion(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

std::optional<std::vector<std::pair<std::string, std::string>>> split_entity_value(
    const std::string& value, IdentifierStyle style, int digit_width) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::size_t text_begin = 0;
  std::size_t i = 0;
  while (i < value.size()) {
    const std::size_t end = match_identifier(value, i, style, digit_width);
    if (end == std::string::npos) {
      ++i;
      continue;
    }
    std::string text = trim(std::string_view(value).substr(text_begin, i - text_begin));
    if (text.empty()) return std::nullopt;
    pairs.emplace_back(std::move(text), value.substr(i, end - i));
    i = end;
    text_begin = end;
  }
  if (pairs.empty()) return std::nullopt;
  if (!trim(std::string_view(value).substr(text_begin)).empty()) return std::nullopt;
  return pairs;
}

std::optional<GroundedEntity> parse_entity_value(const std::string& value,
                                                 const ChunkContext& ctx,
                                                 std::vector<std::string> type_path,
                                                 int sample_index,
                                                 DiscardReason* reason) {
  auto discard = [&](DiscardReason r) {
    if (reason) *reason = r;
    return std::nullopt;
  };
  const int width = identifier_digit_width(ctx.scheme.buckets);
  auto pairs = split_entity_value(value, ctx.scheme.identifier_style, width);
  if (!pairs) return discard(DiscardReason::invalid_value_format);

  GroundedEntity entity;
  entity.type_path = std::move(type_path);
  entity.chunk_index = ctx.chunk->chunk_index;
  entity.sample_index = sample_index;
  std::vector<std::string> texts;
  std::optional<BoundingBox> box;
  for (auto& [text, id] : *pairs) {
    const std::vector<int>* candidates = ctx.id_map.find(id);
    if (!candidates) return discard(DiscardReason::hallucinated_segment);
    bool grounded = false;
    for (int seg_index : *candidates) {
      const Segment& seg = ctx.chunk->segments[static_cast<std::size_t>(seg_index)];
      auto ranges = locate_text_in_segment(seg, text);
      if (ranges.empty()) continue;
      const WordRange r = ranges.front();
      for (int w = r.first; w <= r.last; ++w) {
        const BoundingBox& wb = seg.words[static_cast<std::size_t>(w)].box;
        box = box ? envelope(*box, wb) : wb;
      }
      entity.segment_refs.push_back({id, seg_index});
      texts.push_back(text);
      grounded = true;
      break;
    }
    if (!grounded) return discard(DiscardReason::text_not_found);
  }
  std::string joined;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i) joined += '\n';
    joined += texts[i];
  }
  entity.value_text = std::move(joined);
  entity.box = box;
  return entity;
}

std::vector<GroundedEntity> decode_for_type(const json& value,
                                            const EntityTypeNode& type,
                                            const ChunkContext& ctx,
                                            std::vector<std::string> path_prefix,
                                            int sample_index,
                                            DecodeCounters& counters) {
  std::vector<std::string> path = std::move(path_prefix);
  path.push_back(type.name);

  std::vector<GroundedEntity> out;
  if (value.is_null()) return out;

  if (type.is_leaf()) {
    std::vector<const json*> raw;
    if (value.is_string()) {
      raw.push_back(&value);
    } else if (value.is_array()) {
      for (const auto& el : value) {
        if (el.is_null()) continue;
        if (!el.is_string()) {
          ++counters.invalid_value_format;
          continue;
        }
        raw.push_back(&el);
      }
    } else {
      ++counters.invalid_value_format;
      return out;
    }
    for (const json* rv : raw) {
      DiscardReason reason = DiscardReason::invalid_value_format;
      auto entity =
          parse_entity_value(rv->get<std::string>(), ctx, path, sample_index, &reason);
      if (entity) {
        out.push_back(std::move(*entity));
      } else {
        count_discard(counters, reason);
      }
    }
    if (type.occurrence == Occurrence::single && out.size() > 1) {
      ++counters.singular_multi_value_resolved;
      out = {resolve_most_frequent(std::move(out))};
    }
    return out;
  }

  std::vector<const json*> objects;
  if (value.is_object()) {
    objects.push_back(&value);
  } else if (value.is_array()) {
    for (const auto& el : value) {
      if (el.is_null()) continue;
      if (!el.is_object()) {
        ++counters.invalid_value_format;
        continue;
      }
      objects.push_back(&el);
    }
  } else {
    ++counters.invalid_value_format;
    return out;
  }
  for (const json* obj : objects) {
    GroundedEntity node;
    node.type_path = path;
    node.chunk_index = ctx.chunk->chunk_index;
    node.sample_index = sample_index;
    for (auto it = obj->begin(); it != obj->end(); ++it) {
      if (!find_child(type.children, it.key())) ++counters.unknown_type_dropped;
    }
    for (const auto& child_type : type.children) {
      auto cit = obj->find(child_type.name);
      if (cit == obj->end()) continue;
      auto decoded =
          decode_for_type(cit.value(), child_type, ctx, path, sample_index, counters);
      for (auto& e : decoded) node.children.push_back(std::move(e));
    }
    if (node.children.empty()) continue;
    std::optional<BoundingBox> box;
    for (const auto& c : node.children) {
      if (c.box) box = box ? envelope(*box, *c.box) : *c.box;
    }
    node.box = box;
    out.push_back(std::move(node));
  }
  if (type.occurrence == Occurrence::single && out.size() > 1) {
    ++counters.singular_multi_value_resolved;
    out = {resolve_most_frequent(std::move(out))};
  }
  return out;
}

std::string entity_vote_key(const GroundedEntity& entity) {
  std::string key;
  key += entity.is_leaf() ? 'L' : 'H';
  for (const auto& p : entity.type_path) {
    key += p;
    key += '\x1f';
  }
  key += '\x1e';
  if (entity.value_text) key += collapse_whitespace(*entity.value_text);
  key += '\x1e';
  for (const auto& r : entity.segment_refs) {
    key += r.identifier;
    key += '\x1d';
  }
  return key;
}

void flatten_vote_keys(const GroundedEntity& entity, std::vector<std::string>& out) {
  out.push_back(entity_vote_key(entity));
  for (const auto& c : entity.children) flatten_vote_keys(c, out);
}

VoteResult majority_vote_leaf(std::span<const SampleCandidates> samples) {
  VoteResult result;
  if (samples.empty()) return result;
  std::vector<std::string> lists(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (const auto& e : samples[i].entities) {
      lists[i] += entity_vote_key(e);
      lists[i] += '\x1c';
    }
  }
  std::size_t best = 0;
  int best_votes = -1;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    int votes = 0;
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (j != i && lists[j] == lists[i]) ++votes;
    }
    if (votes > best_votes ||
        (votes == best_votes &&
         samples[i].sample_index < samples[best].sample_index)) {
      best = i;
      best_votes = votes;
    }
  }
  result.winning_sample = samples[best].sample_index;
  result.entities = samples[best].entities;
  return result;
}

VoteResult majority_vote_hierarchical(std::span<const SampleCandidates> samples) {
  VoteResult result;
  if (samples.empty()) return result;
  std::vector<std::map<std::string, int>> bags(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<std::string> keys;
    for (const auto& e : samples[i].entities) flatten_vote_keys(e, keys);
    for (auto& k : keys) ++bags[i][k];
  }
  std::size_t best = 0;
  long long best_tally = -1;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    long long tally = 0;
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (j == i) continue;
      for (const auto& [key, count] : bags[i]) {
        auto it = bags[j].find(key);
        if (it != bags[j].end()) tally += std::min(count, it->second);
      }
    }
    if (tally > best_tally ||
        (tally == best_tally &&
         samples[i].sample_index < samples[best].sample_index)) {
      best = i;
      best_tally = tally;
    }
  }
  result.winning_sample = samples[best].sample_index;
  result.entities = samples[best].entities;
  return result;
}

std::vector<GroundedEntity> merge_chunks(std::span<const ChunkDecodeResult> chunks,
                                         const ExtractionSchema& schema,
                                         DecodeCounters& merge_counters) {
  std::vector<GroundedEntity> out;
  for (std::size_t r = 0; r < schema.roots.size(); ++r) {
    const EntityTypeNode& root = schema.roots[r];
    for (const auto& ch : chunks) {
      if (ch.per_root.size() != schema.roots.size()) {
        fail(ErrorCode::schema_mismatch,
             "chunk result width " + std::to_string(ch.per_root.size()) +
                 " does not match schema root count " +
                 std::to_string(schema.roots.size()));
      }
    }
    if (root.occurrence == Occurrence::repeated) {
      for (const auto& ch : chunks) {
        for (const auto& e : ch.per_root[r]) out.push_back(e);
      }
      continue;
    }
    std::vector<const GroundedEntity*> candidates;
    for (const auto& ch : chunks) {
      for (const auto& e : ch.per_root[r]) candidates.push_back(&e);
    }
    if (candidates.empty()) continue;
    if (candidates.size() > 1) {
      ++merge_counters.singular_multi_value_resolved;
      std::map<std::string, int> counts;
      std::vector<std::string> keys;
      keys.reserve(candidates.size());
      for (const auto* e : candidates) {
        keys.push_back(text_canonical(*e));
        ++counts[keys.back()];
      }
      std::size_t best = 0;
      for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (counts[keys[i]] > counts[keys[best]]) best = i;
      }
      out.push_back(*candidates[best]);
    } else {
      out.push_back(*candidates[0]);
    }
  }
  return out;
}

DocumentExtraction decode_document(std::span<const RawCompletion> completions,
                                   std::span<const DocumentChunk> chunks,
                                   const ExtractionSchema& schema,
                                   const CoordinateScheme& scheme) {
  DocumentExtraction result;
  if (!chunks.empty()) result.doc_id = chunks.front().doc_id;
  result.trace.completions_total = static_cast<std::int64_t>(completions.size());

  std::vector<ChunkContext> contexts;
  contexts.reserve(chunks.size());
  std::map<int, std::size_t> position;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    contexts.push_back(make_chunk_context(chunks[i], scheme));
    position[chunks[i].chunk_index] = i;
  }

  std::vector<std::vector<const RawCompletion*>> by_chunk(chunks.size());
  for (const auto& c : completions) {
    auto it = position.find(c.chunk_index);
    if (it == position.end()) {
      fail(ErrorCode::malformed_input,
           "completion references unknown chunk " + std::to_string(c.chunk_index));
    }
    by_chunk[it->second].push_back(&c);
  }

  std::vector<ChunkDecodeResult> chunk_results;
  chunk_results.reserve(chunks.size());
  for (std::size_t ci = 0; ci < chunks.size(); ++ci) {
    const ChunkContext& ctx = contexts[ci];
    std::vector<std::vector<SampleCandidates>> per_root(schema.roots.size());
    for (const RawCompletion* rc : by_chunk[ci]) {
      CompletionTrace trace;
      trace.chunk_index = rc->chunk_index;
      trace.sample_index = rc->sample_index;
      auto tree = parse_completion(rc->text);
      if (!tree) {
        ++trace.counters.invalid_json;
        result.trace.per_completion.push_back(trace);
        continue;
      }
      for (auto it = tree->begin(); it != tree->end(); ++it) {
        if (!find_child(schema.roots, it.key())) ++trace.counters.unknown_type_dropped;
      }
      for (std::size_t r = 0; r < schema.roots.size(); ++r) {
        const EntityTypeNode& root = schema.roots[r];
        SampleCandidates cand;
        cand.sample_index = rc->sample_index;
        auto vit = tree->find(root.name);
        if (vit != tree->end()) {
          cand.entities = decode_for_type(vit.value(), root, ctx, {},
                                          rc->sample_index, trace.counters);
        }
        per_root[r].push_back(std::move(cand));
      }
      result.trace.per_completion.push_back(trace);
    }
    ChunkDecodeResult cr;
    cr.chunk_index = chunks[ci].chunk_index;
    cr.per_root.resize(schema.roots.size());
    for (std::size_t r = 0; r < schema.roots.size(); ++r) {
      if (per_root[r].empty()) continue;
      VoteResult vote = schema.roots[r].is_leaf()
                            ? majority_vote_leaf(per_root[r])
                            : majority_vote_hierarchical(per_root[r]);
      cr.per_root[r] = std::move(vote.entities);
    }
    chunk_results.push_back(std::move(cr));
  }

  result.entities = merge_chunks(chunk_results, schema, result.trace.merge);
  return result;
}

namespace {

ordered_json counters_to_json(const DecodeCounters& c) {
  return ordered_json{{"invalid_json", c.invalid_json},
                      {"invalid_value_format", c.invalid_value_format},
                      {"text_not_found", c.text_not_found},
                      {"unknown_type_dropped", c.unknown_type_dropped},
                      {"singular_multi_value_resolved", c.singular_multi_value_resolved}};
}

DecodeCounters counters_from_json(const json& j) {
  DecodeCounters c;
  c.invalid_json = j.value("invalid_json", std::int64_t{0});
  c.invalid_value_format = j.value("invalid_value_format", std::int64_t{0});
  c.text_not_found = j.value("text_not_found", std::int64_t{0});
  c.unknown_type_dropped = j.value("unknown_type_dropped", std::int64_t{0});
  c.singular_multi_value_resolved =
      j.value("singular_multi_value_resolved", std::int64_t{0});
  return c;
}

ordered_json entity_to_json(const GroundedEntity& e) {
  ordered_json out;
  out["type_path"] = e.type_path;
  out["value"] = e.value_text ? ordered_json(*e.value_text) : ordered_json(nullptr);
  if (e.box) {
    out["box"] = {e.box->x_min, e.box->y_min, e.box->x_max, e.box->y_max};
  } else {
    out["box"] = nullptr;
  }
  auto segments = ordered_json::array();
  for (const auto& r : e.segment_refs) segments.push_back(r.identifier);
  out["segments"] = segments;
  auto children = ordered_json::array();
  for (const auto& c : e.children) children.push_back(entity_to_json(c));
  out["children"] = children;
  return out;
}

GroundedEntity entity_from_json(const json& j) {
  GroundedEntity e;
  if (!j.is_object() || !j.contains("type_path") || !j["type_path"].is_array()) {
    fail(ErrorCode::malformed_input, "extraction entities need a type_path list");
  }
  for (const auto& p : j["type_path"]) {
    if (!p.is_string()) {
      fail(ErrorCode::malformed_input, "type_path elements must be strings");
    }
    e.type_path.push_back(p.get<std::string>());
  }
  if (j.contains("value") && j["value"].is_string()) {
    e.value_text = j["value"].get<std::string>();
  }
  if (j.contains("box") && j["box"].is_array() && j["box"].size() == 4) {
    e.box = BoundingBox{j["box"][0].get<double>(), j["box"][1].get<double>(),
                        j["box"][2].get<double>(), j["box"][3].get<double>()};
  }
  if (j.contains("segments") && j["segments"].is_array()) {
    for (const auto& s : j["segments"]) {
      if (s.is_string()) e.segment_refs.push_back({s.get<std::string>(), -1});
    }
  }
  if (j.contains("children") && j["children"].is_array()) {
    for (const auto& c : j["children"]) e.children.push_back(entity_from_json(c));
  }
  return e;
}

}  // namespace

ordered_json extraction_to_json(const DocumentExtraction& extraction) {
  ordered_json out;
  out["doc_id"] = extraction.doc_id;
  auto entities = ordered_json::array();
  for (const auto& e : extraction.entities) entities.push_back(entity_to_json(e));
  out["entities"] = entities;
  ordered_json trace = counters_to_json(extraction.trace.totals());
  trace["completions_total"] = extraction.trace.completions_total;
  trace["merge"] = counters_to_json(extraction.trace.merge);
  auto per = ordered_json::array();
  for (const auto& t : extraction.trace.per_completion) {
    ordered_json entry{{"chunk_index", t.chunk_index},
                       {"sample_index", t.sample_index}};
    entry["counters"] = counters_to_json(t.counters);
    per.push_back(entry);
  }
  trace["per_completion"] = per;
  out["trace"] = trace;
  return out;
}

DocumentExtraction extraction_from_json(const json& j) {
  if (!j.is_object() || !j.contains("doc_id") || !j["doc_id"].is_string()) {
    fail(ErrorCode::malformed_input, "extraction files need a doc_id");
  }
  DocumentExtraction ex;
  ex.doc_id = j["doc_id"].get<std::string>();
  if (j.contains("entities")) {
    if (!j["entities"].is_array()) {
      fail(ErrorCode::malformed_input, "extraction entities must be a list");
    }
    for (const auto& e : j["entities"]) ex.entities.push_back(entity_from_json(e));
  }
  if (j.contains("trace") && j["trace"].is_object()) {
    const json& t = j["trace"];
    ex.trace.completions_total = t.value("completions_total", std::int64_t{0});
    if (t.contains("per_completion") && t["per_completion"].is_array()) {
      for (const auto& p : t["per_completion"]) {
        CompletionTrace ct;
        ct.chunk_index = p.value("chunk_index", 0);
        ct.sample_index = p.value("sample_index", 0);
        if (p.contains("counters")) ct.counters = counters_from_json(p["counters"]);
        ex.trace.per_completion.push_back(ct);
      }
      if (t.contains("merge") && t["merge"].is_object()) {
        ex.trace.merge = counters_from_json(t["merge"]);
      }
    } else {
      // Flat counters only: park them in merge so totals() reproduces them.
      ex.trace.merge = counters_from_json(t);
    }
  }
  return ex;
}

}  // namespace lmdx
