#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>

#include "lmdx/document.hpp"

namespace lmdx {

using TokenCounter = std::function<std::size_t(std::string_view)>;

// Splits on whitespace, then each run into maximal all-alphanumeric /
// all-non-alphanumeric groups; every group is one token ("75|02" counts 3).
TokenCounter default_token_counter();

// Contiguous slice of one page's segment list (at a fixed segment level).
struct DocumentChunk {
  std::string doc_id;
  int source_page_index = 0;
  int chunk_index = 0;          // increases over the whole document
  int first_segment_index = 0;  // offset into the page's (level-adjusted) list
  std::vector<Segment> segments;
};

// Full prompt token cost of a prospective chunk with these segments.
using PromptCost = std::function<std::size_t(std::span<const Segment>)>;

// Repeatedly takes the largest prefix of the remaining page segments whose
// prompt cost fits max_input_tokens, then continues with the remainder.
// Chunks partition each page in order; empty pages produce nothing. A segment
// whose one-element chunk exceeds the budget raises segment_too_large.
// The cost function must be monotone in the prefix (true for prompt costs
// under any sane token counter); the largest feasible prefix is found by
// binary search.
std::vector<DocumentChunk> chunk_document(const Document& doc,
                                          std::size_t max_input_tokens,
                                          const PromptCost& cost);

// Same, after re-slicing pages to the requested segment granularity.
std::vector<DocumentChunk> chunk_document_at_level(const Document& doc,
                                                   SegmentLevel level,
                                                   std::size_t max_input_tokens,
                                                   const PromptCost& cost);

}  // namespace lmdx
