#include "lmdx/chunker.hpp"

#include <cctype>

#include "lmdx/error.hpp"

namespace lmdx {

TokenCounter default_token_counter() {
  return [](std::string_view text) -> std::size_t {
    std::size_t count = 0;
    std::size_t i = 0;
    auto is_ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    auto is_an = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    while (i < text.size()) {
      if (is_ws(text[i])) {
        ++i;
        continue;
      }
      const bool alnum = is_an(text[i]);
      ++count;
      while (i < text.size() && !is_ws(text[i]) && is_an(text[i]) == alnum) ++i;
    }
    return count;
  };
}

namespace {

void chunk_page(const std::string& doc_id, int page_index,
                const std::vector<Segment>& segments,
                std::size_t max_input_tokens, const PromptCost& cost,
                int& chunk_index, std::vector<DocumentChunk>& out) {
  std::size_t start = 0;
  const std::size_t n = segments.size();
  while (start < n) {
    std::span<const Segment> rest(segments.data() + start, n - start);
    if (cost(rest.subspan(0, 1)) > max_input_tokens) {
      fail(ErrorCode::segment_too_large,
           "page " + std::to_string(page_index) + " segment " +
               std::to_string(start) + " does not fit the token budget alone: \"" +
               segments[start].text.substr(0, 40) + "\"");
    }
    // Largest feasible prefix; the cost is monotone in the prefix length.
    std::size_t lo = 1, hi = rest.size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo + 1) / 2;
      if (cost(rest.subspan(0, mid)) <= max_input_tokens) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    DocumentChunk chunk;
    chunk.doc_id = doc_id;
    chunk.source_page_index = page_index;
    chunk.chunk_index = chunk_index++;
    chunk.first_segment_index = static_cast<int>(start);
    chunk.segments.assign(rest.begin(), rest.begin() + static_cast<long>(lo));
    out.push_back(std::move(chunk));
    start += lo;
  }
}

}  // namespace

std::vector<DocumentChunk> chunk_document(const Document& doc,
                                          std::size_t max_input_tokens,
                                          const PromptCost& cost) {
  std::vector<DocumentChunk> out;
  int chunk_index = 0;
  for (std::size_t p = 0; p < doc.pages.size(); ++p) {
    chunk_page(doc.doc_id, static_cast<int>(p), doc.pages[p].segments,
               max_input_tokens, cost, chunk_index, out);
  }
  return out;
}

std::vector<DocumentChunk> chunk_document_at_level(const Document& doc,
                                                   SegmentLevel level,
                                                   std::size_t max_input_tokens,
                                                   const PromptCost& cost) {
  std::vector<DocumentChunk> out;
  int chunk_index = 0;
  for (std::size_t p = 0; p < doc.pages.size(); ++p) {
    const auto segments = segments_at_level(doc.pages[p], level);
    chunk_page(doc.doc_id, static_cast<int>(p), segments, max_input_tokens, cost,
               chunk_index, out);
  }
  return out;
}

}  // namespace lmdx
