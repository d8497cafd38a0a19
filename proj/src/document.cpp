#include "lmdx/document.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lmdx/error.hpp"

namespace lmdx {

using nlohmann::json;

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_ws = true;  // swallow leading whitespace
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_ws) out.push_back(' ');
      in_ws = true;
    } else {
      out.push_back(c);
      in_ws = false;
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

namespace {

constexpr double kWordBoxTol = 1e-6;

BoundingBox parse_box(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    fail(ErrorCode::malformed_input, where + ": box must be [x_min,y_min,x_max,y_max]");
  }
  for (const auto& v : j) {
    if (!v.is_number()) fail(ErrorCode::malformed_input, where + ": box values must be numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>()};
}

BoundingBox normalize_box(BoundingBox b, double w, double h) {
  return {b.x_min / w, b.y_min / h, b.x_max / w, b.y_max / h};
}

void check_box_geometry(const BoundingBox& b, const std::string& where) {
  if (!(b.x_min <= b.x_max) || !(b.y_min <= b.y_max)) {
    fail(ErrorCode::geometry_error, where + ": box min exceeds max");
  }
  if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > 1.0 || b.y_max > 1.0) {
    fail(ErrorCode::geometry_error, where + ": box outside [0,1] after normalization");
  }
}

std::vector<Word> synthesize_words(const std::string& text, const BoundingBox& box) {
  std::vector<Word> words;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) words.push_back({tok, box});
  return words;
}

std::string joined_word_text(const std::vector<Word>& words) {
  std::string joined;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) joined.push_back(' ');
    joined += words[i].text;
  }
  return joined;
}

}  // namespace

Document load_document(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::malformed_input, std::string("document is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("doc_id") || !j.contains("pages")) {
    fail(ErrorCode::malformed_input, "document must be an object with doc_id and pages");
  }
  if (!j["doc_id"].is_string() || j["doc_id"].get<std::string>().empty()) {
    fail(ErrorCode::malformed_input, "doc_id must be a non-empty string");
  }
  if (!j["pages"].is_array()) fail(ErrorCode::malformed_input, "pages must be an array");

  Document doc;
  doc.doc_id = j["doc_id"].get<std::string>();
  if (j["pages"].empty()) {
    fail(ErrorCode::empty_document, "document " + doc.doc_id + " has no pages");
  }

  int page_index = 0;
  for (const auto& pj : j["pages"]) {
    const std::string pwhere = "page " + std::to_string(page_index);
    if (!pj.is_object() || !pj.contains("width") || !pj.contains("height") ||
        !pj.contains("lines")) {
      fail(ErrorCode::malformed_input, pwhere + ": page needs width, height, lines");
    }
    if (!pj["width"].is_number() || !pj["height"].is_number() ||
        !pj["lines"].is_array()) {
      fail(ErrorCode::malformed_input, pwhere + ": bad width/height/lines types");
    }
    const double w = pj["width"].get<double>();
    const double h = pj["height"].get<double>();
    if (w <= 0.0 || h <= 0.0) {
      fail(ErrorCode::malformed_input, pwhere + ": width and height must be positive");
    }
    const bool pre_normalized = (w == 1.0 && h == 1.0);
    const double dx = pre_normalized ? 1.0 : w;
    const double dy = pre_normalized ? 1.0 : h;

    Page page;
    page.width = 1.0;
    page.height = 1.0;
    int seg_index = 0;
    for (const auto& lj : pj["lines"]) {
      const std::string swhere = pwhere + " segment " + std::to_string(seg_index);
      if (!lj.is_object() || !lj.contains("text") || !lj.contains("box")) {
        fail(ErrorCode::malformed_input, swhere + ": line needs text and box");
      }
      if (!lj["text"].is_string()) {
        fail(ErrorCode::malformed_input, swhere + ": text must be a string");
      }
      Segment seg;
      seg.text = lj["text"].get<std::string>();
      if (seg.text.find('\n') != std::string::npos) {
        fail(ErrorCode::malformed_input, swhere + ": segment text must not contain newlines");
      }
      seg.box = normalize_box(parse_box(lj["box"], swhere), dx, dy);
      check_box_geometry(seg.box, swhere);
      seg.level = SegmentLevel::line;

      if (lj.contains("words")) {
        if (!lj["words"].is_array()) {
          fail(ErrorCode::malformed_input, swhere + ": words must be an array");
        }
        int word_index = 0;
        for (const auto& wj : lj["words"]) {
          const std::string wwhere = swhere + " word " + std::to_string(word_index);
          if (!wj.is_object() || !wj.contains("text") || !wj.contains("box") ||
              !wj["text"].is_string()) {
            fail(ErrorCode::malformed_input, wwhere + ": word needs text and box");
          }
          Word word;
          word.text = wj["text"].get<std::string>();
          if (word.text.empty()) {
            fail(ErrorCode::malformed_input, wwhere + ": word text must be non-empty");
          }
          if (word.text.find('\n') != std::string::npos) {
            fail(ErrorCode::malformed_input, wwhere + ": word text must not contain newlines");
          }
          word.box = normalize_box(parse_box(wj["box"], wwhere), dx, dy);
          check_box_geometry(word.box, wwhere);
          if (!contains(seg.box, word.box, kWordBoxTol)) {
            fail(ErrorCode::geometry_error, wwhere + ": word box outside segment box");
          }
          seg.words.push_back(std::move(word));
          ++word_index;
        }
        if (joined_word_text(seg.words) != collapse_whitespace(seg.text)) {
          fail(ErrorCode::malformed_input,
               swhere + ": word texts do not reassemble the segment text");
        }
      } else {
        seg.words = synthesize_words(seg.text, seg.box);
      }
      page.segments.push_back(std::move(seg));
      ++seg_index;
    }
    doc.pages.push_back(std::move(page));
    ++page_index;
  }
  return doc;
}

Document load_document_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open document file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_document(ss.str());
}

std::string serialize_document(const Document& doc) {
  json pages = json::array();
  for (const auto& page : doc.pages) {
    json lines = json::array();
    for (const auto& seg : page.segments) {
      json words = json::array();
      for (const auto& w : seg.words) {
        words.push_back({{"text", w.text},
                         {"box", {w.box.x_min, w.box.y_min, w.box.x_max, w.box.y_max}}});
      }
      lines.push_back({{"text", seg.text},
                       {"box", {seg.box.x_min, seg.box.y_min, seg.box.x_max, seg.box.y_max}},
                       {"words", std::move(words)}});
    }
    pages.push_back({{"width", 1.0}, {"height", 1.0}, {"lines", std::move(lines)}});
  }
  json j{{"doc_id", doc.doc_id}, {"pages", std::move(pages)}};
  return j.dump(1);
}

std::vector<WordRange> locate_text_in_segment(const Segment& segment,
                                              std::string_view extracted_text) {
  const std::string needle = collapse_whitespace(extracted_text);
  std::vector<WordRange> out;
  if (needle.empty() || segment.words.empty()) return out;

  std::string hay;
  std::vector<int> owner;  // word index per character; -1 for joining spaces
  for (std::size_t i = 0; i < segment.words.size(); ++i) {
    if (i) {
      hay.push_back(' ');
      owner.push_back(-1);
    }
    for (char c : segment.words[i].text) {
      hay.push_back(c);
      owner.push_back(static_cast<int>(i));
    }
  }

  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + 1)) {
    int first = -1, last = -1;
    for (std::size_t k = pos; k < pos + needle.size(); ++k) {
      if (owner[k] >= 0) {
        if (first < 0) first = owner[k];
        last = owner[k];
      }
    }
    if (first < 0) continue;  // needle of pure spaces cannot occur (collapsed)
    WordRange range{first, last};
    if (out.empty() || !(out.back() == range)) out.push_back(range);
  }
  return out;
}

std::vector<Segment> segments_at_level(const Page& page, SegmentLevel level) {
  if (level == SegmentLevel::line) return page.segments;
  std::vector<Segment> out;
  for (const auto& seg : page.segments) {
    for (const auto& w : seg.words) {
      Segment s;
      s.text = w.text;
      s.box = w.box;
      s.words = {w};
      s.level = SegmentLevel::word;
      out.push_back(std::move(s));
    }
  }
  return out;
}

BoundingBox word_range_envelope(const Segment& segment, const WordRange& range) {
  if (range.first < 0 || range.last < range.first ||
      range.last >= static_cast<int>(segment.words.size())) {
    fail(ErrorCode::out_of_range, "word range outside segment");
  }
  BoundingBox env = segment.words[range.first].box;
  for (int i = range.first + 1; i <= range.last; ++i) {
    env = envelope(env, segment.words[i].box);
  }
  return env;
}

}  // namespace lmdx
