#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmdx/chunker.hpp"
#include "lmdx/document.hpp"
#include "lmdx/schema.hpp"

namespace lmdx {

enum class IdentifierStyle { center_2, corners_4, line_index };

struct CoordinateScheme {
  SegmentLevel segment_level = SegmentLevel::line;
  IdentifierStyle identifier_style = IdentifierStyle::center_2;
  int buckets = 100;
  int json_indent = 0;  // 0 renders the schema on a single line

  bool operator==(const CoordinateScheme&) const = default;
};

inline constexpr const char* kDefaultTaskDescription =
    "From the document, extract the text values and tags of the following "
    "entities:";

// min(floor(value * buckets), buckets - 1); value must be in [0, 1].
int quantize(double value, int buckets);

// Digits needed for the largest bucket index (buckets - 1).
int identifier_digit_width(int buckets);

// "XX|YY" (box center), "XX|YY|XX|YY" (min/max corners), or "<ordinal>".
// Coordinate fields are zero-padded to the bucket digit width.
std::string segment_identifier(const Segment& segment,
                               const CoordinateScheme& scheme, int ordinal);

// identifier -> indices (chunk order) of every segment that rendered to it.
struct SegmentIdMap {
  std::map<std::string, std::vector<int>> ids;

  const std::vector<int>* find(const std::string& id) const {
    auto it = ids.find(id);
    return it == ids.end() ? nullptr : &it->second;
  }
  bool has_collisions() const {
    for (const auto& [k, v] : ids) {
      if (v.size() > 1) return true;
    }
    return false;
  }
};

struct DocumentSection {
  std::string text;  // one "{segment text} {identifier}" line per segment
  SegmentIdMap id_map;
};

DocumentSection render_document_section(const DocumentChunk& chunk,
                                        const CoordinateScheme& scheme);

// Schema JSON with ": " and ", " separators; indent > 0 switches to the
// one-item-per-line style with that many spaces per level.
std::string render_schema(const ExtractionSchema& schema, int indent = 0);

// Renders a completion/groundtruth-shaped entity tree with the same
// conventions (used for targets and in-context exemplar blocks).
std::string render_completion(const nlohmann::ordered_json& tree, int indent = 0);

struct Prompt {
  std::string text;
  std::string doc_id;
  int chunk_index = 0;
  SegmentIdMap id_map;  // target chunk's identifiers
};

Prompt build_prompt(const DocumentChunk& chunk, const ExtractionSchema& schema,
                    const CoordinateScheme& scheme,
                    const std::string& task_description = kDefaultTaskDescription);

// Prompt cost closure for the chunker: full prompt tokens for a prospective
// segment slice under this schema/scheme/task.
PromptCost make_prompt_cost(const ExtractionSchema& schema,
                            const CoordinateScheme& scheme,
                            const TokenCounter& counter,
                            const std::string& task_description = kDefaultTaskDescription);

struct IclExemplar {
  DocumentChunk chunk;
  std::string completion_text;
};

// Exemplar blocks (document + task + completed extraction) ahead of the
// target prompt. Trailing exemplars that push the prompt over the token limit
// are dropped; if none fit at all, raises no_exemplar_fits.
Prompt build_icl_prompt(std::span<const IclExemplar> exemplars,
                        const DocumentChunk& target,
                        const ExtractionSchema& schema,
                        const CoordinateScheme& scheme,
                        const TokenCounter& counter,
                        std::size_t max_input_tokens,
                        const std::string& task_description = kDefaultTaskDescription);

}  // namespace lmdx
