#pragma once
// Shared builders for the test suites.
//
// The synthetic documents use word texts that are unique within the document,
// so text grounding is exact: any value the decoder accepts must come from
// the segment it cites, and a claimed text placed on the wrong segment can
// never be found by accident.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lmdx/chunker.hpp"
#include "lmdx/decoder.hpp"
#include "lmdx/document.hpp"
#include "lmdx/prompt.hpp"
#include "lmdx/schema.hpp"

#ifndef LMDX_FIXTURES_DIR
#define LMDX_FIXTURES_DIR "fixtures"
#endif

namespace testsup {

inline std::string fixture_path(const std::string& rel) {
  return std::string(LMDX_FIXTURES_DIR) + "/" + rel;
}

// Line whose box is exactly the envelope of its word boxes, words spaced
// left to right.
inline lmdx::Segment make_line(const std::vector<std::string>& words, double x0,
                               double y0, double word_width = 0.03,
                               double height = 0.008, double gap = 0.004) {
  lmdx::Segment seg;
  double x = x0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) seg.text += ' ';
    seg.text += words[i];
    seg.words.push_back({words[i], {x, y0, x + word_width, y0 + height}});
    x += word_width + gap;
  }
  seg.box = seg.words.front().box;
  for (const auto& w : seg.words) seg.box = lmdx::envelope(seg.box, w.box);
  return seg;
}

struct DocShape {
  int pages = 1;
  int min_lines = 1;
  int max_lines = 20;
  int min_words = 1;
  int max_words = 5;
};

// Random document whose every word text is unique ("u0", "u1", ...). Lines
// start at y = 0.1 and words at x >= 0.05, so bucket row and column 0 stay
// empty and identifiers like "00|00" can never name a real segment.
inline lmdx::Document unique_word_doc(std::mt19937_64& rng,
                                      const DocShape& shape = {},
                                      const std::string& doc_id = "synthetic") {
  auto pick = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  lmdx::Document doc;
  doc.doc_id = doc_id;
  int serial = 0;
  for (int p = 0; p < shape.pages; ++p) {
    lmdx::Page page;
    const int n_lines = pick(shape.min_lines, shape.max_lines);
    const double pitch = 0.88 / n_lines;
    for (int l = 0; l < n_lines; ++l) {
      const int n_words = pick(shape.min_words, shape.max_words);
      std::vector<std::string> words;
      words.reserve(static_cast<std::size_t>(n_words));
      for (int w = 0; w < n_words; ++w) words.push_back("u" + std::to_string(serial++));
      const double width = 0.02 + 0.001 * static_cast<double>(pick(0, 20));
      const double height = std::min(0.008, pitch * 0.6);
      page.segments.push_back(
          make_line(words, 0.05, 0.1 + pitch * l, width, height));
    }
    doc.pages.push_back(std::move(page));
  }
  return doc;
}

// Random schema: a few leaf roots plus hierarchical roots with leaf children.
inline lmdx::ExtractionSchema random_schema(std::mt19937_64& rng) {
  auto pick = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  lmdx::ExtractionSchema schema;
  const int n_roots = pick(2, 6);
  for (int r = 0; r < n_roots; ++r) {
    lmdx::EntityTypeNode node;
    node.name = "r" + std::to_string(r);
    switch (pick(0, 3)) {
      case 0:
        break;  // singular leaf
      case 1:
        node.occurrence = lmdx::Occurrence::repeated;
        break;
      case 2:
      case 3: {
        node.occurrence = pick(0, 1) ? lmdx::Occurrence::repeated
                                     : lmdx::Occurrence::single;
        const int n_children = pick(2, 3);
        for (int c = 0; c < n_children; ++c) {
          lmdx::EntityTypeNode child;
          child.name = "c" + std::to_string(c);
          node.children.push_back(std::move(child));
        }
        break;
      }
    }
    schema.roots.push_back(std::move(node));
  }
  return schema;
}

// A synthetic document with groundtruth planted inside its chunks: the gold
// completion trees (one per chunk), and the extraction the pipeline must
// reproduce from them.
struct RoundTrip {
  lmdx::Document doc;
  lmdx::ExtractionSchema schema;
  lmdx::CoordinateScheme scheme;
  std::vector<lmdx::DocumentChunk> chunks;
  std::vector<nlohmann::ordered_json> trees;
  std::vector<std::string> completions;
  std::vector<lmdx::GroundedEntity> expected;  // chunk/sample indices zeroed
};

namespace detail {

struct Pick {
  int chunk = 0;
  int segment = 0;  // ordinal within the chunk
};

inline Pick pick_segment(std::mt19937_64& rng,
                         const std::vector<lmdx::DocumentChunk>& chunks) {
  const int c = static_cast<int>(rng() % chunks.size());
  const int s = static_cast<int>(rng() % chunks[c].segments.size());
  return {c, s};
}

inline lmdx::GroundedEntity leaf_from_picks(
    const std::vector<lmdx::DocumentChunk>& chunks,
    const lmdx::CoordinateScheme& scheme, std::vector<std::string> path,
    std::span<const Pick> picks, std::string* rendered) {
  lmdx::GroundedEntity e;
  e.type_path = std::move(path);
  std::string value_text;
  std::string value;
  std::optional<lmdx::BoundingBox> box;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const auto& seg = chunks[picks[i].chunk].segments[picks[i].segment];
    const std::string id = lmdx::segment_identifier(seg, scheme, picks[i].segment);
    if (i) {
      value_text += '\n';
      value += ' ';
    }
    value_text += seg.text;
    value += seg.text + " " + id;
    e.segment_refs.push_back({id, picks[i].segment});
    box = box ? lmdx::envelope(*box, seg.box) : seg.box;
  }
  e.value_text = value_text;
  e.box = box;
  *rendered = value;
  return e;
}

}  // namespace detail

// Plants random groundtruth for `schema` in the chunked document. Every
// entity's segments come from a single chunk (multi-part values included), so
// reproducing the plant exercises grounding and voting but no cross-chunk
// conflict resolution. Repeated roots may spread instances over chunks; their
// expected order is chunk-major.
inline RoundTrip make_round_trip(std::mt19937_64& rng,
                                 const lmdx::CoordinateScheme& scheme,
                                 std::size_t budget, const DocShape& shape) {
  RoundTrip rt;
  rt.scheme = scheme;
  rt.schema = random_schema(rng);
  rt.doc = unique_word_doc(rng, shape);
  rt.chunks = lmdx::chunk_document_at_level(
      rt.doc, scheme.segment_level, budget,
      lmdx::make_prompt_cost(rt.schema, scheme, lmdx::default_token_counter()));

  auto chance = [&rng](double p) {
    return static_cast<double>(rng() % 1000) < p * 1000.0;
  };

  // Per chunk, per root, the completion value (starts absent).
  std::vector<std::vector<nlohmann::ordered_json>> values(
      rt.chunks.size(),
      std::vector<nlohmann::ordered_json>(rt.schema.roots.size()));

  for (std::size_t r = 0; r < rt.schema.roots.size(); ++r) {
    const auto& root = rt.schema.roots[r];
    if (root.is_leaf() && root.occurrence == lmdx::Occurrence::single) {
      if (!chance(0.85)) continue;
      auto first = detail::pick_segment(rng, rt.chunks);
      std::vector<detail::Pick> picks{first};
      if (chance(0.3) && rt.chunks[first.chunk].segments.size() > 1) {
        detail::Pick second{first.chunk, 0};
        do {
          second.segment = static_cast<int>(
              rng() % rt.chunks[first.chunk].segments.size());
        } while (second.segment == first.segment);
        picks.push_back(second);
      }
      std::string rendered;
      rt.expected.push_back(detail::leaf_from_picks(rt.chunks, scheme,
                                                    {root.name}, picks,
                                                    &rendered));
      values[static_cast<std::size_t>(first.chunk)][r] = rendered;
    } else if (root.is_leaf()) {
      const int m = static_cast<int>(rng() % 4);
      std::vector<detail::Pick> picks;
      for (int i = 0; i < m; ++i) picks.push_back(detail::pick_segment(rng, rt.chunks));
      std::stable_sort(picks.begin(), picks.end(),
                       [](const detail::Pick& a, const detail::Pick& b) {
                         return a.chunk < b.chunk;
                       });
      for (const auto& p : picks) {
        std::string rendered;
        rt.expected.push_back(detail::leaf_from_picks(
            rt.chunks, scheme, {root.name}, std::span(&p, 1), &rendered));
        auto& slot = values[static_cast<std::size_t>(p.chunk)][r];
        if (!slot.is_array()) slot = nlohmann::ordered_json::array();
        slot.push_back(rendered);
      }
    } else {
      const bool repeated = root.occurrence == lmdx::Occurrence::repeated;
      const int groups = repeated ? static_cast<int>(rng() % 4) : (chance(0.85) ? 1 : 0);
      struct PlannedGroup {
        int chunk = 0;
        nlohmann::ordered_json object;
        lmdx::GroundedEntity entity;
        bool alive = false;
      };
      std::vector<PlannedGroup> planned;
      for (int g = 0; g < groups; ++g) {
        PlannedGroup pg;
        pg.chunk = static_cast<int>(rng() % rt.chunks.size());
        pg.entity.type_path = {root.name};
        for (const auto& child : root.children) {
          if (!chance(0.8)) {
            pg.object[child.name] = nullptr;
            continue;
          }
          detail::Pick p{pg.chunk,
                         static_cast<int>(rng() %
                                          rt.chunks[static_cast<std::size_t>(pg.chunk)]
                                              .segments.size())};
          std::string rendered;
          pg.entity.children.push_back(detail::leaf_from_picks(
              rt.chunks, scheme, {root.name, child.name}, std::span(&p, 1),
              &rendered));
          pg.object[child.name] = rendered;
        }
        pg.alive = !pg.entity.children.empty();
        if (pg.alive) {
          pg.entity.box = pg.entity.children.front().box;
          for (const auto& c : pg.entity.children) {
            pg.entity.box = lmdx::envelope(*pg.entity.box, *c.box);
          }
        }
        planned.push_back(std::move(pg));
      }
      std::stable_sort(planned.begin(), planned.end(),
                       [](const PlannedGroup& a, const PlannedGroup& b) {
                         return a.chunk < b.chunk;
                       });
      for (auto& pg : planned) {
        auto& slot = values[static_cast<std::size_t>(pg.chunk)][r];
        if (repeated) {
          if (!slot.is_array()) slot = nlohmann::ordered_json::array();
          slot.push_back(pg.object);
        } else {
          slot = pg.object;
        }
        if (pg.alive) rt.expected.push_back(std::move(pg.entity));
      }
    }
  }

  for (std::size_t c = 0; c < rt.chunks.size(); ++c) {
    nlohmann::ordered_json tree = nlohmann::ordered_json::object();
    for (std::size_t r = 0; r < rt.schema.roots.size(); ++r) {
      const auto& v = values[c][r];
      if (v.is_null() &&
          rt.schema.roots[r].occurrence == lmdx::Occurrence::repeated) {
        tree[rt.schema.roots[r].name] = nlohmann::ordered_json::array();
      } else {
        tree[rt.schema.roots[r].name] = v;
      }
    }
    rt.trees.push_back(tree);
    rt.completions.push_back(lmdx::render_completion(tree, scheme.json_indent));
  }

  // Schema-root order, as the decoder emits them.
  std::stable_sort(rt.expected.begin(), rt.expected.end(),
                   [&](const lmdx::GroundedEntity& a, const lmdx::GroundedEntity& b) {
                     auto index = [&](const std::string& name) {
                       for (std::size_t i = 0; i < rt.schema.roots.size(); ++i) {
                         if (rt.schema.roots[i].name == name) return i;
                       }
                       return rt.schema.roots.size();
                     };
                     return index(a.type_path.front()) < index(b.type_path.front());
                   });
  return rt;
}

inline std::vector<lmdx::RawCompletion> identical_samples(const RoundTrip& rt,
                                                          int k) {
  std::vector<lmdx::RawCompletion> out;
  for (std::size_t c = 0; c < rt.chunks.size(); ++c) {
    for (int s = 0; s < k; ++s) {
      out.push_back({rt.completions[c], rt.doc.doc_id,
                     rt.chunks[c].chunk_index, s, lmdx::FinishReason::stop});
    }
  }
  return out;
}

// Structural equality ignoring the chunk/sample bookkeeping fields.
inline bool same_entity(const lmdx::GroundedEntity& a,
                        const lmdx::GroundedEntity& b) {
  if (a.type_path != b.type_path || a.value_text != b.value_text ||
      a.segment_refs != b.segment_refs || a.box != b.box ||
      a.children.size() != b.children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!same_entity(a.children[i], b.children[i])) return false;
  }
  return true;
}

inline bool same_entities(std::span<const lmdx::GroundedEntity> a,
                          std::span<const lmdx::GroundedEntity> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_entity(a[i], b[i])) return false;
  }
  return true;
}

// No-hallucination audit: every leaf cites resolvable segments of its chunk
// and each claimed text occurs on the cited segment verbatim; parents carry
// no value and envelope their children.
inline bool entity_grounded(const lmdx::GroundedEntity& e,
                            const lmdx::DocumentChunk& chunk,
                            const lmdx::CoordinateScheme& scheme) {
  if (e.children.empty()) {
    if (!e.value_text || !e.box || e.segment_refs.empty()) return false;
    std::vector<std::string> parts;
    std::size_t start = 0;
    const std::string& text = *e.value_text;
    while (true) {
      const auto nl = text.find('\n', start);
      parts.push_back(text.substr(start, nl - start));
      if (nl == std::string::npos) break;
      start = nl + 1;
    }
    if (parts.size() != e.segment_refs.size()) return false;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& ref = e.segment_refs[i];
      if (ref.segment_index < 0 ||
          ref.segment_index >= static_cast<int>(chunk.segments.size())) {
        return false;
      }
      const auto& seg = chunk.segments[static_cast<std::size_t>(ref.segment_index)];
      if (lmdx::segment_identifier(seg, scheme, ref.segment_index) != ref.identifier) {
        return false;
      }
      if (lmdx::locate_text_in_segment(seg, parts[i]).empty()) return false;
    }
    return true;
  }
  if (e.value_text || !e.segment_refs.empty() || !e.box) return false;
  lmdx::BoundingBox env = *e.children.front().box;
  for (const auto& c : e.children) {
    if (!entity_grounded(c, chunk, scheme)) return false;
    env = lmdx::envelope(env, *c.box);
  }
  return env == *e.box;
}

// One deliberately broken completion for a single-chunk round trip, paired
// with its exact expected effect: the counter delta the decoder must report
// and a cleaned tree whose (discard-free) decode yields the surviving
// entities. Corrupted array elements become null in the cleaned tree, which
// the decoder skips without counting.
struct CorruptionOutcome {
  std::string corrupted;
  nlohmann::ordered_json cleaned;
  lmdx::DecodeCounters expected;
  const char* label = "";
};

inline constexpr int kCorruptionKinds = 10;

namespace detail {

inline void collect_sites(const nlohmann::ordered_json& node, const std::string& ptr,
                          std::vector<std::string>& strings,
                          std::vector<std::string>& groups) {
  if (node.is_string()) {
    strings.push_back(ptr);
  } else if (node.is_object()) {
    if (!ptr.empty()) groups.push_back(ptr);
    for (const auto& [key, value] : node.items()) {
      collect_sites(value, ptr + "/" + key, strings, groups);
    }
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) {
      collect_sites(node[i], ptr + "/" + std::to_string(i), strings, groups);
    }
  }
}

// An identifier that is well-formed but names no segment: row/column 0 stays
// empty by document construction, and chunks never reach 900 lines.
inline std::string invented_identifier(const lmdx::CoordinateScheme& scheme) {
  if (scheme.identifier_style == lmdx::IdentifierStyle::line_index) return "<997>";
  const std::string zeros(
      static_cast<std::size_t>(lmdx::identifier_digit_width(scheme.buckets)), '0');
  std::string id = zeros + "|" + zeros;
  if (scheme.identifier_style == lmdx::IdentifierStyle::corners_4) {
    id += "|" + zeros + "|" + zeros;
  }
  return id;
}

}  // namespace detail

// Applies corruption `kind` (0..kCorruptionKinds-1) to the round trip's only
// chunk tree. Returns nothing when the tree has no site for that kind.
inline std::optional<CorruptionOutcome> corrupt_completion(const RoundTrip& rt,
                                                           int kind,
                                                           std::mt19937_64& rng) {
  using nlohmann::ordered_json;
  const ordered_json& tree = rt.trees.front();
  CorruptionOutcome out;
  out.cleaned = tree;

  std::vector<std::string> strings;
  std::vector<std::string> groups;
  detail::collect_sites(tree, "", strings, groups);
  auto pick = [&rng](const std::vector<std::string>& v) {
    return ordered_json::json_pointer(v[rng() % v.size()]);
  };
  const std::string seg0_id =
      lmdx::segment_identifier(rt.chunks.front().segments.front(), rt.scheme, 0);

  switch (kind) {
    case 0: {
      out.label = "truncated JSON";
      const std::string full = rt.completions.front();
      if (full.size() < 2) return std::nullopt;
      out.corrupted = full.substr(0, 1 + rng() % (full.size() - 1));
      if (lmdx::parse_completion(out.corrupted)) return std::nullopt;  // rare benign cut
      out.cleaned = ordered_json::object();
      out.expected.invalid_json = 1;
      return out;
    }
    case 1: {
      out.label = "non-object payload";
      out.corrupted = (rng() % 2) ? "[]" : "\"just text\"";
      out.cleaned = ordered_json::object();
      out.expected.invalid_json = 1;
      return out;
    }
    case 2: {
      out.label = "invented identifier";
      if (strings.empty()) return std::nullopt;
      ordered_json mutated = tree;
      const auto site = pick(strings);
      mutated.at(site) = "zq " + detail::invented_identifier(rt.scheme);
      out.corrupted = lmdx::render_completion(mutated, rt.scheme.json_indent);
      out.cleaned.at(site) = nullptr;
      out.expected.text_not_found = 1;
      return out;
    }
    case 3: {
      out.label = "claimed text absent from segment";
      if (strings.empty()) return std::nullopt;
      ordered_json mutated = tree;
      const auto site = pick(strings);
      mutated.at(site) = "zqzq " + seg0_id;
      out.corrupted = lmdx::render_completion(mutated, rt.scheme.json_indent);
      out.cleaned.at(site) = nullptr;
      out.expected.text_not_found = 1;
      return out;
    }
    case 4: {
      out.label = "value without identifier";
      if (strings.empty()) return std::nullopt;
      ordered_json mutated = tree;
      const auto site = pick(strings);
      mutated.at(site) = "zqzq";
      out.corrupted = lmdx::render_completion(mutated, rt.scheme.json_indent);
      out.cleaned.at(site) = nullptr;
      out.expected.invalid_value_format = 1;
      return out;
    }
    case 5: {
      out.label = "identifier without text";
      if (strings.empty()) return std::nullopt;
      ordered_json mutated = tree;
      const auto site = pick(strings);
      mutated.at(site) = seg0_id;
      out.corrupted = lmdx::render_completion(mutated, rt.scheme.json_indent);
      out.cleaned.at(site) = nullptr;
      out.expected.invalid_value_format = 1;
      return out;
    }
    case 6: {
      out.label = "text after the last identifier";
      if (strings.empty()) return std::nullopt;
      ordered_json mutated = tree;
      const auto site = pick(strings);
      mutated.at(site) = mutated.at(site).get<std::string>() + " zq";
      out.corrupted = lmdx::render_completion(mutated, rt.scheme.json_indent);
      out.cleaned.at(site) = nullptr;
      out.expected.invalid_value_format = 1;
      return out;
    }
    case 7: {
      out.label = "non-string leaf";
      if (strings.empty()) return std::nullopt;
      ordered_json mutated = tree;
      const auto site = pick(strings);
      mutated.at(site) = 42;
      out.corrupted = lmdx::render_completion(mutated, rt.scheme.json_indent);
      out.cleaned.at(site) = nullptr;
      out.expected.invalid_value_format = 1;
      return out;
    }
    case 8: {
      out.label = "key outside the schema";
      ordered_json mutated = tree;
      mutated["zz_bogus"] = nullptr;
      out.corrupted = lmdx::render_completion(mutated, rt.scheme.json_indent);
      out.expected.unknown_type_dropped = 1;
      return out;
    }
    case 9: {
      out.label = "group key outside the schema";
      if (groups.empty()) return std::nullopt;
      ordered_json mutated = tree;
      mutated.at(pick(groups))["zz_bogus"] = "zq";
      out.corrupted = lmdx::render_completion(mutated, rt.scheme.json_indent);
      out.expected.unknown_type_dropped = 1;
      return out;
    }
    default:
      return std::nullopt;
  }
}

// Brute-force reference for the voting rules, computed over opaque keys.
// exact_list: a vote is a sample whose whole key list is identical.
// Otherwise: each pair of samples contributes its multiset key overlap.
// Winner is the highest tally, ties to the lowest sample position.
inline std::size_t oracle_vote_winner(
    const std::vector<std::vector<std::string>>& keys, bool exact_list) {
  std::vector<long long> tally(keys.size(), 0);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = 0; j < keys.size(); ++j) {
      if (i == j) continue;
      if (exact_list) {
        tally[i] += keys[i] == keys[j] ? 1 : 0;
      } else {
        std::vector<std::string> a = keys[i], b = keys[j];
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        std::size_t x = 0, y = 0;
        while (x < a.size() && y < b.size()) {
          if (a[x] == b[y]) {
            ++tally[i];
            ++x;
            ++y;
          } else if (a[x] < b[y]) {
            ++x;
          } else {
            ++y;
          }
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < keys.size(); ++i) {
    if (tally[i] > tally[best]) best = i;
  }
  return best;
}

}  // namespace testsup
