#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lmdx/chunker.hpp"
#include "lmdx/geometry.hpp"
#include "lmdx/inference.hpp"
#include "lmdx/prompt.hpp"
#include "lmdx/schema.hpp"

namespace lmdx {

// One grounded identifier occurrence inside an entity value.
struct SegmentRef {
  std::string identifier;   // identifier text as it appeared in the completion
  int segment_index = 0;    // ordinal of the resolved segment within its chunk

  bool operator==(const SegmentRef&) const = default;
};

// Decoded entity. Invariant: leaf <=> children empty <=> value_text present.
// A leaf's box is the envelope of its matched words; a parent's box is the
// envelope of its children. Parents with no surviving children are never
// emitted.
struct GroundedEntity {
  std::vector<std::string> type_path;
  std::optional<std::string> value_text;
  std::vector<SegmentRef> segment_refs;
  std::optional<BoundingBox> box;
  std::vector<GroundedEntity> children;
  int chunk_index = 0;
  int sample_index = 0;

  bool is_leaf() const { return children.empty(); }
};

struct DecodeCounters {
  std::int64_t invalid_json = 0;
  std::int64_t invalid_value_format = 0;
  std::int64_t text_not_found = 0;  // includes unresolvable identifiers
  std::int64_t unknown_type_dropped = 0;
  std::int64_t singular_multi_value_resolved = 0;

  DecodeCounters& operator+=(const DecodeCounters& o) {
    invalid_json += o.invalid_json;
    invalid_value_format += o.invalid_value_format;
    text_not_found += o.text_not_found;
    unknown_type_dropped += o.unknown_type_dropped;
    singular_multi_value_resolved += o.singular_multi_value_resolved;
    return *this;
  }
  bool operator==(const DecodeCounters&) const = default;
};

struct CompletionTrace {
  int chunk_index = 0;
  int sample_index = 0;
  DecodeCounters counters;
};

struct DecodeTrace {
  std::vector<CompletionTrace> per_completion;  // one entry per completion
  DecodeCounters merge;                         // cross-chunk resolution only
  std::int64_t completions_total = 0;

  DecodeCounters totals() const {
    DecodeCounters t;
    for (const auto& c : per_completion) t += c.counters;
    t += merge;
    return t;
  }
};

struct DocumentExtraction {
  std::string doc_id;
  std::vector<GroundedEntity> entities;  // schema root order
  DecodeTrace trace;
};

// Everything needed to ground one chunk's completions.
struct ChunkContext {
  const DocumentChunk* chunk = nullptr;
  SegmentIdMap id_map;  // identifiers of chunk->segments, chunk ordinals
  CoordinateScheme scheme;
};

ChunkContext make_chunk_context(const DocumentChunk& chunk,
                                const CoordinateScheme& scheme);

// Strict parse of a completion body. Anything that is not a JSON object
// (including parse failures) is a discarded completion.
std::optional<nlohmann::json> parse_completion(const std::string& text);

// Splits an entity value into interleaved (claimed text, identifier) pairs.
// Identifier tokens must not touch adjacent digits. Returns nothing when the
// value has no identifier, a missing text before some identifier, or trailing
// text after the last one.
std::optional<std::vector<std::pair<std::string, std::string>>> split_entity_value(
    const std::string& value, IdentifierStyle style, int digit_width);

enum class DiscardReason {
  invalid_value_format,
  hallucinated_segment,  // identifier absent from the chunk id map
  text_not_found,        // identifier resolves but the claimed text is absent
};

// Grounds one leaf value against the chunk: every identifier must resolve and
// every claimed text must occur on its segment (identifier collisions try the
// colliding segments in chunk order). value_text joins the trimmed claimed
// texts with newlines; the box is the envelope of all matched words.
std::optional<GroundedEntity> parse_entity_value(const std::string& value,
                                                 const ChunkContext& ctx,
                                                 std::vector<std::string> type_path,
                                                 int sample_index,
                                                 DiscardReason* reason = nullptr);

// Decodes a completion value for one schema node. Never throws; per-entity
// problems are counted in `counters` and the offending entity skipped.
std::vector<GroundedEntity> decode_for_type(const nlohmann::json& value,
                                            const EntityTypeNode& type,
                                            const ChunkContext& ctx,
                                            std::vector<std::string> path_prefix,
                                            int sample_index,
                                            DecodeCounters& counters);

// Entity lists contributed by one completion, aligned with schema.roots.
struct SampleCandidates {
  int sample_index = 0;
  std::vector<GroundedEntity> entities;
};

struct VoteResult {
  int winning_sample = -1;  // -1 when there were no candidates
  std::vector<GroundedEntity> entities;
};

// Canonical identity of one leaf entity for voting: type path, whitespace-
// collapsed value, ordered identifier list.
std::string entity_vote_key(const GroundedEntity& entity);

// Vote keys of the node and all descendants, pre-order.
void flatten_vote_keys(const GroundedEntity& entity, std::vector<std::string>& out);

// Candidate = a sample's whole (possibly empty) list; a vote for sample i is
// another sample with a list-equal candidate; ties go to the lowest sample.
VoteResult majority_vote_leaf(std::span<const SampleCandidates> samples);

// Each sample is scored by the total multiset overlap of its flattened vote
// keys with every other sample; the best sample supplies its entire tree
// list; ties go to the lowest sample.
VoteResult majority_vote_hierarchical(std::span<const SampleCandidates> samples);

// One chunk's voted entities, aligned with schema.roots.
struct ChunkDecodeResult {
  int chunk_index = 0;
  std::vector<std::vector<GroundedEntity>> per_root;
};

// Concatenates repeated roots in chunk order. A single-occurrence root fed by
// several chunks keeps the most frequent value (text-only comparison, ties to
// the earliest chunk) and counts the resolution.
std::vector<GroundedEntity> merge_chunks(std::span<const ChunkDecodeResult> chunks,
                                         const ExtractionSchema& schema,
                                         DecodeCounters& merge_counters);

// Full pipeline over one document's completions: parse, decode, vote per
// chunk and root, merge across chunks. Completions are matched to chunks by
// chunk_index; chunks must be in chunk order.
DocumentExtraction decode_document(std::span<const RawCompletion> completions,
                                   std::span<const DocumentChunk> chunks,
                                   const ExtractionSchema& schema,
                                   const CoordinateScheme& scheme);

nlohmann::ordered_json extraction_to_json(const DocumentExtraction& extraction);
DocumentExtraction extraction_from_json(const nlohmann::json& j);

}  // namespace lmdx
