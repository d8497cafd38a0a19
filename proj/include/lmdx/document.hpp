#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lmdx/geometry.hpp"

namespace lmdx {

struct Word {
  std::string text;  // non-empty, no newlines
  BoundingBox box;

  bool operator==(const Word&) const = default;
};

enum class SegmentLevel { line, word };

// One OCR segment in reading order. Invariants (checked at load):
//  - text joined from word texts by single spaces equals collapse_whitespace(text)
//  - every word box is contained in the segment box (tolerance 1e-6)
// When the source provides no words, one word per whitespace token is
// synthesized with the segment box standing in for each word box.
struct Segment {
  std::string text;
  BoundingBox box;
  std::vector<Word> words;
  SegmentLevel level = SegmentLevel::line;

  bool operator==(const Segment&) const = default;
};

struct Page {
  double width = 1.0;
  double height = 1.0;
  std::vector<Segment> segments;

  bool operator==(const Page&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<Page> pages;

  bool operator==(const Document&) const = default;
};

// Collapses every whitespace run to a single space and trims the ends.
std::string collapse_whitespace(std::string_view text);

// Parses the document interchange JSON. Boxes are divided by the page
// width/height unless both are 1 (already normalized); after loading, pages
// are canonical (width == height == 1, boxes in [0,1]).
Document load_document(const std::string& json_text);
Document load_document_file(const std::string& path);

// Canonical JSON for a loaded Document; load_document(serialize_document(d)) == d.
std::string serialize_document(const Document& doc);

// Inclusive word index range within one segment.
struct WordRange {
  int first = 0;
  int last = 0;

  bool operator==(const WordRange&) const = default;
};

// All matches of extracted_text on the segment, case-sensitive after
// whitespace collapsing on both sides, in word order. Partial-word matches
// return the covering word range. An empty (after collapsing) query matches
// nothing.
std::vector<WordRange> locate_text_in_segment(const Segment& segment,
                                              std::string_view extracted_text);

// Page segments at the requested granularity: pass-through for line level,
// one segment per word for word level (word boxes, or the line box where the
// source had no word geometry).
std::vector<Segment> segments_at_level(const Page& page, SegmentLevel level);

BoundingBox word_range_envelope(const Segment& segment, const WordRange& range);

}  // namespace lmdx
