#include "lmdx/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "lmdx/chunker.hpp"
#include "lmdx/error.hpp"

namespace lmdx {

using nlohmann::ordered_json;

namespace {

std::string normalize_text(std::string_view text, const MatchConfig& config) {
  std::string out = collapse_whitespace(text);
  if (!config.case_sensitive) {
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string path_key(const std::vector<std::string>& path) {
  std::string key;
  for (const auto& p : path) {
    key += p;
    key += '\x1f';
  }
  return key;
}

std::string path_display(const std::vector<std::string>& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += '/';
    out += path[i];
  }
  return out;
}

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

std::string trim_copy(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

void collect_extraction_leaves(const GroundedEntity& entity,
                               std::vector<EvalEntity>& out) {
  if (entity.is_leaf()) {
    if (!entity.value_text) return;  // tolerated in hand-written files
    out.push_back({entity.type_path, *entity.value_text, entity.box, {}});
    return;
  }
  for (const auto& c : entity.children) collect_extraction_leaves(c, out);
}

// Document-wide segment list at one level plus its identifier map.
struct ResolvedDocument {
  std::vector<Segment> segments;
  SegmentIdMap id_map;
};

ResolvedDocument resolve_document(const Document& doc, const CoordinateScheme& scheme) {
  ResolvedDocument rd;
  for (const auto& page : doc.pages) {
    auto segs = segments_at_level(page, scheme.segment_level);
    for (auto& s : segs) rd.segments.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < rd.segments.size(); ++i) {
    rd.id_map.ids[segment_identifier(rd.segments[i], scheme, static_cast<int>(i))]
        .push_back(static_cast<int>(i));
  }
  return rd;
}

struct TreeWalk {
  CoordinateScheme scheme;
  int digit_width = 2;
  const ResolvedDocument* resolved = nullptr;  // optional
};

EvalEntity make_tree_leaf(const std::string& value, std::vector<std::string> path,
                          const TreeWalk& ctx) {
  EvalEntity entity;
  entity.type_path = std::move(path);
  auto pairs = split_entity_value(value, ctx.scheme.identifier_style, ctx.digit_width);
  if (!pairs) {
    entity.text = trim_copy(value);
    return entity;
  }
  std::string joined;
  for (std::size_t i = 0; i < pairs->size(); ++i) {
    if (i) joined += '\n';
    joined += (*pairs)[i].first;
  }
  entity.text = joined;
  if (ctx.resolved) {
    for (const auto& [text, id] : *pairs) {
      const std::vector<int>* candidates = ctx.resolved->id_map.find(id);
      if (!candidates || candidates->empty()) continue;
      int chosen = (*candidates)[0];
      for (int cand : *candidates) {
        const Segment& seg = ctx.resolved->segments[static_cast<std::size_t>(cand)];
        if (!locate_text_in_segment(seg, text).empty()) {
          chosen = cand;
          break;
        }
      }
      entity.gold_region.push_back(
          ctx.resolved->segments[static_cast<std::size_t>(chosen)].box);
    }
  }
  return entity;
}

void walk_tree_value(const ordered_json& value, const EntityTypeNode& type,
                     std::vector<std::string> path_prefix, const TreeWalk& ctx,
                     std::vector<EvalEntity>& out) {
  std::vector<std::string> path = std::move(path_prefix);
  path.push_back(type.name);
  if (value.is_null()) return;

  if (type.is_leaf()) {
    if (value.is_string()) {
      out.push_back(make_tree_leaf(value.get<std::string>(), path, ctx));
    } else if (value.is_array()) {
      for (const auto& el : value) {
        if (el.is_string()) {
          out.push_back(make_tree_leaf(el.get<std::string>(), path, ctx));
        }
      }
    }
    return;
  }

  auto walk_object = [&](const ordered_json& obj) {
    for (const auto& child : type.children) {
      auto it = obj.find(child.name);
      if (it == obj.end()) continue;
      walk_tree_value(it.value(), child, path, ctx, out);
    }
  };
  if (value.is_object()) {
    walk_object(value);
  } else if (value.is_array()) {
    for (const auto& el : value) {
      if (el.is_object()) walk_object(el);
    }
  }
}

}  // namespace

std::vector<EvalEntity> entities_from_extraction(const DocumentExtraction& extraction) {
  std::vector<EvalEntity> out;
  for (const auto& e : extraction.entities) collect_extraction_leaves(e, out);
  return out;
}

std::vector<EvalEntity> entities_from_tree(const ordered_json& tree,
                                           const ExtractionSchema& schema,
                                           const CoordinateScheme& scheme,
                                           const Document* doc) {
  if (!tree.is_object()) {
    fail(ErrorCode::malformed_input, "entity tree must be a JSON object");
  }
  TreeWalk ctx;
  ctx.scheme = scheme;
  ctx.digit_width = identifier_digit_width(scheme.buckets);
  ResolvedDocument resolved;
  if (doc) {
    resolved = resolve_document(*doc, scheme);
    ctx.resolved = &resolved;
  }
  std::vector<EvalEntity> out;
  for (const auto& root : schema.roots) {
    auto it = tree.find(root.name);
    if (it == tree.end()) continue;
    walk_tree_value(it.value(), root, {}, ctx, out);
  }
  return out;
}

MicroMetrics micro_f1(std::span<const EvalEntity> predictions,
                      std::span<const EvalEntity> groundtruth,
                      const MatchConfig& config) {
  struct TypeBucket {
    std::string display;
    std::map<std::string, std::int64_t> pred;
    std::map<std::string, std::int64_t> gold;
    std::int64_t pred_total = 0;
    std::int64_t gold_total = 0;
  };
  std::map<std::string, TypeBucket> buckets;
  for (const auto& e : predictions) {
    auto& b = buckets[path_key(e.type_path)];
    b.display = path_display(e.type_path);
    ++b.pred[normalize_text(e.text, config)];
    ++b.pred_total;
  }
  for (const auto& e : groundtruth) {
    auto& b = buckets[path_key(e.type_path)];
    b.display = path_display(e.type_path);
    ++b.gold[normalize_text(e.text, config)];
    ++b.gold_total;
  }

  MicroMetrics m;
  for (const auto& [key, b] : buckets) {
    std::int64_t tp = 0;
    for (const auto& [text, count] : b.pred) {
      auto it = b.gold.find(text);
      if (it != b.gold.end()) tp += std::min(count, it->second);
    }
    PerTypeRow row;
    row.type_path = b.display;
    row.tp = tp;
    row.fp = b.pred_total - tp;
    row.fn = b.gold_total - tp;
    row.precision = ratio(row.tp, row.tp + row.fp);
    row.recall = ratio(row.tp, row.tp + row.fn);
    row.f1 = f1_of(row.precision, row.recall);
    m.tp += row.tp;
    m.fp += row.fp;
    m.fn += row.fn;
    m.per_type.push_back(std::move(row));
  }
  std::sort(m.per_type.begin(), m.per_type.end(),
            [](const PerTypeRow& a, const PerTypeRow& b) {
              return a.type_path < b.type_path;
            });
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = f1_of(m.precision, m.recall);
  return m;
}

std::vector<EntityGroup> groups_from_extraction(const DocumentExtraction& extraction,
                                                const std::string& root_name) {
  std::vector<EntityGroup> groups;
  for (const auto& e : extraction.entities) {
    if (e.type_path.size() != 1 || e.type_path[0] != root_name) continue;
    if (e.is_leaf()) continue;
    EntityGroup g;
    collect_extraction_leaves(e, g.leaves);
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<EntityGroup> groups_from_tree(const ordered_json& tree,
                                          const ExtractionSchema& schema,
                                          const std::string& root_name,
                                          const CoordinateScheme& scheme) {
  const EntityTypeNode* root = find_child(schema.roots, root_name);
  if (!root) {
    fail(ErrorCode::schema_mismatch, "schema has no root named " + root_name);
  }
  if (root->is_leaf()) {
    fail(ErrorCode::schema_mismatch, root_name + " is not hierarchical");
  }
  std::vector<EntityGroup> groups;
  if (!tree.is_object()) return groups;
  auto it = tree.find(root_name);
  if (it == tree.end() || it->is_null()) return groups;

  TreeWalk ctx;
  ctx.scheme = scheme;
  ctx.digit_width = identifier_digit_width(scheme.buckets);
  auto add_group = [&](const ordered_json& obj) {
    EntityGroup g;
    std::vector<std::string> prefix{root_name};
    for (const auto& child : root->children) {
      auto cit = obj.find(child.name);
      if (cit == obj.end()) continue;
      walk_tree_value(cit.value(), child, prefix, ctx, g.leaves);
    }
    groups.push_back(std::move(g));
  };
  if (it->is_object()) {
    add_group(*it);
  } else if (it->is_array()) {
    for (const auto& el : *it) {
      if (el.is_object()) add_group(el);
    }
  }
  return groups;
}

namespace {

std::string group_signature(const EntityGroup& group, const MatchConfig& config) {
  std::vector<std::string> parts;
  parts.reserve(group.leaves.size());
  for (const auto& leaf : group.leaves) {
    parts.push_back(path_key(leaf.type_path) + '\x1e' +
                    normalize_text(leaf.text, config));
  }
  std::sort(parts.begin(), parts.end());
  std::string sig;
  for (const auto& p : parts) {
    sig += p;
    sig += '\x1d';
  }
  return sig;
}

}  // namespace

double group_f1(std::span<const EntityGroup> predictions,
                std::span<const EntityGroup> groundtruth,
                const MatchConfig& config) {
  std::map<std::string, std::int64_t> pred_sigs;
  std::map<std::string, std::int64_t> gold_sigs;
  for (const auto& g : predictions) ++pred_sigs[group_signature(g, config)];
  for (const auto& g : groundtruth) ++gold_sigs[group_signature(g, config)];
  std::int64_t tp = 0;
  for (const auto& [sig, count] : pred_sigs) {
    auto it = gold_sigs.find(sig);
    if (it != gold_sigs.end()) tp += std::min(count, it->second);
  }
  const double p = ratio(tp, static_cast<std::int64_t>(predictions.size()));
  const double r = ratio(tp, static_cast<std::int64_t>(groundtruth.size()));
  return f1_of(p, r);
}

LocalizationReport localization_accuracy(std::span<const EvalEntity> predictions,
                                         std::span<const EvalEntity> groundtruth,
                                         const MatchConfig& config) {
  std::map<std::string, std::vector<const EvalEntity*>> gold_by_class;
  for (const auto& g : groundtruth) {
    gold_by_class[path_key(g.type_path) + '\x1e' + normalize_text(g.text, config)]
        .push_back(&g);
  }
  std::map<std::string, std::size_t> used;
  LocalizationReport report;
  for (const auto& p : predictions) {
    const std::string key =
        path_key(p.type_path) + '\x1e' + normalize_text(p.text, config);
    auto it = gold_by_class.find(key);
    if (it == gold_by_class.end()) continue;
    std::size_t& cursor = used[key];
    if (cursor >= it->second.size()) continue;  // more preds than gold copies
    const EvalEntity* gold = it->second[cursor];
    ++cursor;
    ++report.n_extracted;
    if (p.box && covered_fraction(*p.box, gold->gold_region) >
                     config.localization_threshold) {
      ++report.n_localized;
    }
  }
  if (report.n_extracted > 0) {
    report.accuracy = static_cast<double>(report.n_localized) /
                      static_cast<double>(report.n_extracted);
  }
  return report;
}

ParsingErrorReport parsing_error_report(std::span<const DecodeTrace> traces) {
  ParsingErrorReport report;
  for (const auto& t : traces) {
    const DecodeCounters totals = t.totals();
    report.completions_total += t.completions_total;
    report.invalid_json += totals.invalid_json;
    report.invalid_value_format += totals.invalid_value_format;
    report.text_not_found += totals.text_not_found;
  }
  return report;
}

std::string format_error_rate(std::int64_t count, std::int64_t total) {
  const double rate =
      total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", rate);
  return buf;
}

std::string format_parsing_error_table(const ParsingErrorReport& report) {
  struct Row {
    const char* name;
    std::int64_t count;
  };
  const Row rows[] = {{"Invalid JSON", report.invalid_json},
                      {"Invalid Entity Value Format", report.invalid_value_format},
                      {"Entity Text Not Found", report.text_not_found}};
  std::string out = "Error type                     Rate\n";
  for (const Row& row : rows) {
    char line[64];
    std::snprintf(line, sizeof(line), "%-30s %s\n", row.name,
                  format_error_rate(row.count, report.completions_total).c_str());
    out += line;
  }
  return out;
}

std::size_t percentile_nearest_rank(std::vector<std::size_t> values, double p) {
  if (values.empty()) {
    fail(ErrorCode::out_of_range, "percentile of an empty sample");
  }
  if (!(p > 0.0) || p > 100.0) {
    fail(ErrorCode::out_of_range, "percentile must be in (0, 100]");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(p / 100.0 * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

namespace {

// Word-level segment ordinal of each line's first word, per resolved line list.
std::vector<int> word_start_ordinals(const std::vector<Segment>& lines) {
  std::vector<int> starts(lines.size());
  int total = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    starts[i] = total;
    total += static_cast<int>(lines[i].words.size());
  }
  return starts;
}

struct Transcoder {
  CoordinateScheme source;
  CoordinateScheme target;
  int source_width = 2;
  ResolvedDocument source_lines;   // source is line level
  ResolvedDocument target_words;   // used when target is word level
  std::vector<int> word_starts;    // line ordinal -> first word ordinal

  std::string transcode_value(const std::string& value) const;
};

std::string Transcoder::transcode_value(const std::string& value) const {
  auto pairs = split_entity_value(value, source.identifier_style, source_width);
  if (!pairs) return value;
  std::string out;
  bool first_pair = true;
  for (const auto& [text, id] : *pairs) {
    const std::vector<int>* candidates = source_lines.id_map.find(id);
    std::string piece;
    if (!candidates || candidates->empty()) {
      piece = text + " " + id;  // unresolvable: keep the original identifier
    } else {
      int line_ordinal = (*candidates)[0];
      WordRange range{-1, -1};
      for (int cand : *candidates) {
        const Segment& seg = source_lines.segments[static_cast<std::size_t>(cand)];
        auto ranges = locate_text_in_segment(seg, text);
        if (!ranges.empty()) {
          line_ordinal = cand;
          range = ranges.front();
          break;
        }
      }
      const Segment& line = source_lines.segments[static_cast<std::size_t>(line_ordinal)];
      if (target.segment_level == SegmentLevel::word && range.first >= 0) {
        for (int w = range.first; w <= range.last; ++w) {
          const int ordinal = word_starts[static_cast<std::size_t>(line_ordinal)] + w;
          const Segment& word_seg =
              target_words.segments[static_cast<std::size_t>(ordinal)];
          if (w > range.first) piece += ' ';
          piece += word_seg.text + " " +
                   segment_identifier(word_seg, target, ordinal);
        }
      } else {
        piece = text + " " + segment_identifier(line, target, line_ordinal);
      }
    }
    if (!first_pair) out += '\n';
    out += piece;
    first_pair = false;
  }
  return out;
}

ordered_json transcode_node(const ordered_json& value, const EntityTypeNode& type,
                            const Transcoder& tc) {
  if (value.is_null()) return nullptr;
  if (type.is_leaf()) {
    if (value.is_string()) return tc.transcode_value(value.get<std::string>());
    if (value.is_array()) {
      ordered_json out = ordered_json::array();
      for (const auto& el : value) {
        if (el.is_string()) {
          out.push_back(tc.transcode_value(el.get<std::string>()));
        } else {
          out.push_back(el);
        }
      }
      return out;
    }
    return value;
  }
  auto transcode_object = [&](const ordered_json& obj) {
    ordered_json out = ordered_json::object();
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const EntityTypeNode* child = find_child(type.children, it.key());
      out[it.key()] = child ? transcode_node(it.value(), *child, tc) : it.value();
    }
    return out;
  };
  if (value.is_object()) return transcode_object(value);
  if (value.is_array()) {
    ordered_json out = ordered_json::array();
    for (const auto& el : value) {
      out.push_back(el.is_object() ? transcode_object(el) : el);
    }
    return out;
  }
  return value;
}

}  // namespace

ordered_json transcode_tree(const ordered_json& tree, const ExtractionSchema& schema,
                            const Document& doc, const CoordinateScheme& source_scheme,
                            const CoordinateScheme& target_scheme) {
  if (source_scheme.segment_level != SegmentLevel::line) {
    fail(ErrorCode::config_error,
         "transcoding resolves identifiers at line level; use line-level gold");
  }
  if (!tree.is_object()) {
    fail(ErrorCode::malformed_input, "entity tree must be a JSON object");
  }
  Transcoder tc;
  tc.source = source_scheme;
  tc.target = target_scheme;
  tc.source_width = identifier_digit_width(source_scheme.buckets);
  tc.source_lines = resolve_document(doc, source_scheme);
  if (target_scheme.segment_level == SegmentLevel::word) {
    tc.target_words = resolve_document(doc, target_scheme);
    tc.word_starts = word_start_ordinals(tc.source_lines.segments);
  }
  ordered_json out = ordered_json::object();
  for (auto it = tree.begin(); it != tree.end(); ++it) {
    const EntityTypeNode* root = find_child(schema.roots, it.key());
    out[it.key()] = root ? transcode_node(it.value(), *root, tc) : it.value();
  }
  return out;
}

std::vector<SchemeTokenStats> token_length_stats(
    std::span<const Document> documents, const ExtractionSchema& schema,
    std::span<const CoordinateScheme> schemes, const TokenCounter& counter,
    std::span<const ordered_json> gold_trees, const CoordinateScheme& gold_scheme) {
  if (!gold_trees.empty() && gold_trees.size() != documents.size()) {
    fail(ErrorCode::malformed_input,
         "gold tree count does not match document count");
  }
  std::vector<SchemeTokenStats> out;
  for (const auto& scheme : schemes) {
    SchemeTokenStats st;
    st.scheme = scheme;
    const auto cost = make_prompt_cost(schema, scheme, counter);
    for (std::size_t d = 0; d < documents.size(); ++d) {
      const Document& doc = documents[d];
      auto chunks = chunk_document_at_level(
          doc, scheme.segment_level, std::numeric_limits<std::size_t>::max(), cost);
      std::size_t prompt_total = 0;
      for (const auto& chunk : chunks) {
        prompt_total += counter(build_prompt(chunk, schema, scheme).text);
      }
      st.prompt_tokens.push_back(prompt_total);
      if (!gold_trees.empty()) {
        const ordered_json transcoded =
            transcode_tree(gold_trees[d], schema, doc, gold_scheme, scheme);
        st.target_tokens.push_back(
            counter(render_completion(transcoded, scheme.json_indent)));
      }
    }
    if (!st.prompt_tokens.empty()) {
      st.prompt_p50 = percentile_nearest_rank(st.prompt_tokens, 50.0);
      st.prompt_p99 = percentile_nearest_rank(st.prompt_tokens, 99.0);
    }
    if (!st.target_tokens.empty()) {
      st.target_p50 = percentile_nearest_rank(st.target_tokens, 50.0);
      st.target_p99 = percentile_nearest_rank(st.target_tokens, 99.0);
    }
    out.push_back(std::move(st));
  }
  return out;
}

std::string format_token_stats_tsv(std::span<const SchemeTokenStats> stats) {
  std::string out = "scheme\tprompt_p50\tprompt_p99\ttarget_p50\ttarget_p99\n";
  for (const auto& st : stats) {
    out += scheme_to_string(st.scheme);
    out += '\t';
    out += std::to_string(st.prompt_p50);
    out += '\t';
    out += std::to_string(st.prompt_p99);
    out += '\t';
    out += st.target_tokens.empty() ? "-" : std::to_string(st.target_p50);
    out += '\t';
    out += st.target_tokens.empty() ? "-" : std::to_string(st.target_p99);
    out += '\n';
  }
  return out;
}

std::string scheme_to_string(const CoordinateScheme& scheme) {
  std::string out = scheme.segment_level == SegmentLevel::word ? "word" : "line";
  out += '/';
  switch (scheme.identifier_style) {
    case IdentifierStyle::center_2:
      out += "center_2";
      break;
    case IdentifierStyle::corners_4:
      out += "corners_4";
      break;
    case IdentifierStyle::line_index:
      out += "line_index";
      break;
  }
  out += '/' + std::to_string(scheme.buckets);
  if (scheme.json_indent != 0) out += '/' + std::to_string(scheme.json_indent);
  return out;
}

CoordinateScheme scheme_from_string(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == '/') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() < 3 || parts.size() > 4) {
    fail(ErrorCode::config_error,
         "scheme must be level/style/buckets[/indent], got: " + text);
  }
  CoordinateScheme scheme;
  if (parts[0] == "line") {
    scheme.segment_level = SegmentLevel::line;
  } else if (parts[0] == "word") {
    scheme.segment_level = SegmentLevel::word;
  } else {
    fail(ErrorCode::config_error, "unknown segment level: " + parts[0]);
  }
  if (parts[1] == "center_2") {
    scheme.identifier_style = IdentifierStyle::center_2;
  } else if (parts[1] == "corners_4") {
    scheme.identifier_style = IdentifierStyle::corners_4;
  } else if (parts[1] == "line_index") {
    scheme.identifier_style = IdentifierStyle::line_index;
  } else {
    fail(ErrorCode::config_error, "unknown identifier style: " + parts[1]);
  }
  try {
    scheme.buckets = std::stoi(parts[2]);
  } catch (const std::exception&) {
    fail(ErrorCode::config_error, "bucket count is not a number: " + parts[2]);
  }
  if (scheme.buckets < 2) {
    fail(ErrorCode::config_error, "bucket count must be at least 2");
  }
  if (parts.size() == 4) {
    try {
      scheme.json_indent = std::stoi(parts[3]);
    } catch (const std::exception&) {
      fail(ErrorCode::config_error, "indent is not a number: " + parts[3]);
    }
    if (scheme.json_indent < 0) {
      fail(ErrorCode::config_error, "indent must be non-negative");
    }
  }
  return scheme;
}

}  // namespace lmdx
