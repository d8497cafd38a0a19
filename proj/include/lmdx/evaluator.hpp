#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmdx/decoder.hpp"
#include "lmdx/document.hpp"
#include "lmdx/geometry.hpp"
#include "lmdx/prompt.hpp"
#include "lmdx/schema.hpp"

namespace lmdx {

enum class GroupMode { greedy_document_order, optimal_assignment };

struct MatchConfig {
  bool case_sensitive = true;  // whitespace is always collapsed first
  GroupMode group_mode = GroupMode::greedy_document_order;
  double localization_threshold = 0.8;  // strictly-greater coverage test
};

// One leaf entity in evaluation form. Predictions carry a box; groundtruth
// carries the line boxes its identifiers resolve to.
struct EvalEntity {
  std::vector<std::string> type_path;
  std::string text;
  std::optional<BoundingBox> box;
  std::vector<BoundingBox> gold_region;
};

// Leaves of a decoded extraction, document order.
std::vector<EvalEntity> entities_from_extraction(const DocumentExtraction& extraction);

// Leaves of a completion-shaped tree (groundtruth or rendered target).
// Values are split into (text, identifier) pairs under `scheme`; a value with
// no identifier is kept whole. When `doc` is given, identifiers are resolved
// against its segments at scheme level and the matching line boxes become the
// entity's gold_region.
std::vector<EvalEntity> entities_from_tree(const nlohmann::ordered_json& tree,
                                           const ExtractionSchema& schema,
                                           const CoordinateScheme& scheme,
                                           const Document* doc = nullptr);

struct PerTypeRow {
  std::string type_path;  // path joined with '/'
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MicroMetrics {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<PerTypeRow> per_type;  // sorted by type_path
};

// Multiset matching per type path on collapsed (optionally lowercased) text.
// All ratios use the 0/0 -> 0 convention.
MicroMetrics micro_f1(std::span<const EvalEntity> predictions,
                      std::span<const EvalEntity> groundtruth,
                      const MatchConfig& config = {});

// One instance of a hierarchical root, reduced to its leaf descendants.
struct EntityGroup {
  std::vector<EvalEntity> leaves;
};

std::vector<EntityGroup> groups_from_extraction(const DocumentExtraction& extraction,
                                                const std::string& root_name);
std::vector<EntityGroup> groups_from_tree(const nlohmann::ordered_json& tree,
                                          const ExtractionSchema& schema,
                                          const std::string& root_name,
                                          const CoordinateScheme& scheme);

// Group-level F1: a predicted group matches a gold group only when their leaf
// multisets are identical. Under that strict test the greedy document-order
// match and the optimal assignment find the same number of pairs, so both
// modes share one implementation.
double group_f1(std::span<const EntityGroup> predictions,
                std::span<const EntityGroup> groundtruth,
                const MatchConfig& config = {});

struct LocalizationReport {
  std::int64_t n_extracted = 0;  // correctly-extracted leaf entities
  std::int64_t n_localized = 0;  // of those, box covered by the gold region
  std::optional<double> accuracy;  // empty when nothing was extracted
};

// Pairs predictions with gold per (type path, normalized text) class in
// document order; a pair is localized when the pred box's covered fraction by
// the gold region strictly exceeds the threshold.
LocalizationReport localization_accuracy(std::span<const EvalEntity> predictions,
                                         std::span<const EvalEntity> groundtruth,
                                         const MatchConfig& config = {});

struct ParsingErrorReport {
  std::int64_t completions_total = 0;
  std::int64_t invalid_json = 0;
  std::int64_t invalid_value_format = 0;
  std::int64_t text_not_found = 0;
};

ParsingErrorReport parsing_error_report(std::span<const DecodeTrace> traces);

// Percentage with two decimals, e.g. "0.25%"; zero completions -> "0.00%".
std::string format_error_rate(std::int64_t count, std::int64_t total);

// Two-column table with the category names and formatted rates.
std::string format_parsing_error_table(const ParsingErrorReport& report);

// Nearest-rank percentile: smallest element with at least p% of the sample at
// or below it. values must be non-empty; p in (0, 100].
std::size_t percentile_nearest_rank(std::vector<std::size_t> values, double p);

struct SchemeTokenStats {
  CoordinateScheme scheme;
  std::vector<std::size_t> prompt_tokens;  // one entry per document
  std::vector<std::size_t> target_tokens;  // present when gold trees given
  std::size_t prompt_p50 = 0;
  std::size_t prompt_p99 = 0;
  std::size_t target_p50 = 0;
  std::size_t target_p99 = 0;
};

// Rewrites a completion-shaped tree's identifiers from source_scheme into
// target_scheme by re-grounding each value on the document. Under a
// word-level target every matched word becomes its own (text, identifier)
// pair.
nlohmann::ordered_json transcode_tree(const nlohmann::ordered_json& tree,
                                      const ExtractionSchema& schema,
                                      const Document& doc,
                                      const CoordinateScheme& source_scheme,
                                      const CoordinateScheme& target_scheme);

// Prompt (and, when gold trees are supplied, target) token counts per
// document under every scheme, with nearest-rank 50th/99th percentiles.
// Documents are rendered page per chunk with no token budget. gold_trees,
// when given, must align with documents and use gold_scheme identifiers.
std::vector<SchemeTokenStats> token_length_stats(
    std::span<const Document> documents, const ExtractionSchema& schema,
    std::span<const CoordinateScheme> schemes, const TokenCounter& counter,
    std::span<const nlohmann::ordered_json> gold_trees = {},
    const CoordinateScheme& gold_scheme = {});

std::string format_token_stats_tsv(std::span<const SchemeTokenStats> stats);

std::string scheme_to_string(const CoordinateScheme& scheme);
CoordinateScheme scheme_from_string(const std::string& text);

}  // namespace lmdx
