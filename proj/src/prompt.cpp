#include "lmdx/prompt.hpp"

#include <cmath>
#include <cstdio>

#include "lmdx/error.hpp"

namespace lmdx {

int quantize(double value, int buckets) {
  if (buckets < 2) fail(ErrorCode::out_of_range, "buckets must be at least 2");
  if (!(value >= 0.0 && value <= 1.0)) {
    fail(ErrorCode::out_of_range,
         "coordinate " + std::to_string(value) + " outside [0,1]");
  }
  return std::min(static_cast<int>(std::floor(value * buckets)), buckets - 1);
}

int identifier_digit_width(int buckets) {
  int width = 1;
  for (int v = buckets - 1; v >= 10; v /= 10) ++width;
  return width;
}

namespace {

std::string pad_int(int value, int width) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%0*d", width, value);
  return buf;
}

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

void append_indent(std::string& out, int indent, int depth) {
  out.append(static_cast<std::size_t>(indent) * depth, ' ');
}

void write_schema_children(const std::vector<EntityTypeNode>& children,
                           std::string& out, int indent, int depth);

void write_schema_value(const EntityTypeNode& node, std::string& out, int indent,
                        int depth) {
  if (node.is_leaf()) {
    out += node.occurrence == Occurrence::repeated ? "[]" : "\"\"";
    return;
  }
  if (node.occurrence == Occurrence::single) {
    write_schema_children(node.children, out, indent, depth);
    return;
  }
  if (indent == 0) {
    out += "[";
    write_schema_children(node.children, out, indent, depth);
    out += "]";
  } else {
    out += "[\n";
    append_indent(out, indent, depth + 1);
    write_schema_children(node.children, out, indent, depth + 1);
    out += "\n";
    append_indent(out, indent, depth);
    out += "]";
  }
}

void write_schema_children(const std::vector<EntityTypeNode>& children,
                           std::string& out, int indent, int depth) {
  if (indent == 0) {
    out += "{";
    for (std::size_t i = 0; i < children.size(); ++i) {
      if (i) out += ", ";
      out += quote(children[i].name) + ": ";
      write_schema_value(children[i], out, indent, depth);
    }
    out += "}";
    return;
  }
  out += "{\n";
  for (std::size_t i = 0; i < children.size(); ++i) {
    append_indent(out, indent, depth + 1);
    out += quote(children[i].name) + ": ";
    write_schema_value(children[i], out, indent, depth + 1);
    if (i + 1 < children.size()) out += ",";
    out += "\n";
  }
  append_indent(out, indent, depth);
  out += "}";
}

void write_tree_value(const nlohmann::ordered_json& v, std::string& out,
                      int indent, int depth) {
  if (v.is_object()) {
    if (v.empty()) {
      out += "{}";
      return;
    }
    if (indent == 0) {
      out += "{";
      bool first = true;
      for (const auto& [k, val] : v.items()) {
        if (!first) out += ", ";
        first = false;
        out += quote(k) + ": ";
        write_tree_value(val, out, indent, depth);
      }
      out += "}";
    } else {
      out += "{\n";
      std::size_t i = 0;
      for (const auto& [k, val] : v.items()) {
        append_indent(out, indent, depth + 1);
        out += quote(k) + ": ";
        write_tree_value(val, out, indent, depth + 1);
        if (++i < v.size()) out += ",";
        out += "\n";
      }
      append_indent(out, indent, depth);
      out += "}";
    }
    return;
  }
  if (v.is_array()) {
    if (v.empty()) {
      out += "[]";
      return;
    }
    if (indent == 0) {
      out += "[";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        write_tree_value(v[i], out, indent, depth);
      }
      out += "]";
    } else {
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        append_indent(out, indent, depth + 1);
        write_tree_value(v[i], out, indent, depth + 1);
        if (i + 1 < v.size()) out += ",";
        out += "\n";
      }
      append_indent(out, indent, depth);
      out += "]";
    }
    return;
  }
  out += v.dump();  // strings (escaped), null, numbers, booleans
}

std::string render_lines(std::span<const Segment> segments,
                         const CoordinateScheme& scheme) {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += "\n";
    out += segments[i].text;
    out += " ";
    out += segment_identifier(segments[i], scheme, static_cast<int>(i));
  }
  return out;
}

std::string assemble_prompt(const std::string& section_text,
                            const std::string& schema_text,
                            const std::string& task_description) {
  std::string out = "<Document>\n";
  out += section_text;
  out += "\n</Document>\n<Task>\n";
  out += task_description;
  out += "\n";
  out += schema_text;
  out += "\n</Task>\n<Extraction>\n";
  return out;
}

}  // namespace

std::string segment_identifier(const Segment& segment,
                               const CoordinateScheme& scheme, int ordinal) {
  switch (scheme.identifier_style) {
    case IdentifierStyle::line_index:
      return "<" + std::to_string(ordinal) + ">";
    case IdentifierStyle::center_2: {
      const int w = identifier_digit_width(scheme.buckets);
      const int cx = quantize((segment.box.x_min + segment.box.x_max) / 2.0,
                              scheme.buckets);
      const int cy = quantize((segment.box.y_min + segment.box.y_max) / 2.0,
                              scheme.buckets);
      return pad_int(cx, w) + "|" + pad_int(cy, w);
    }
    case IdentifierStyle::corners_4: {
      const int w = identifier_digit_width(scheme.buckets);
      return pad_int(quantize(segment.box.x_min, scheme.buckets), w) + "|" +
             pad_int(quantize(segment.box.y_min, scheme.buckets), w) + "|" +
             pad_int(quantize(segment.box.x_max, scheme.buckets), w) + "|" +
             pad_int(quantize(segment.box.y_max, scheme.buckets), w);
    }
  }
  fail(ErrorCode::out_of_range, "unknown identifier style");
}

DocumentSection render_document_section(const DocumentChunk& chunk,
                                        const CoordinateScheme& scheme) {
  DocumentSection section;
  section.text = render_lines(chunk.segments, scheme);
  for (std::size_t i = 0; i < chunk.segments.size(); ++i) {
    section.id_map
        .ids[segment_identifier(chunk.segments[i], scheme, static_cast<int>(i))]
        .push_back(static_cast<int>(i));
  }
  return section;
}

std::string render_schema(const ExtractionSchema& schema, int indent) {
  std::string out;
  write_schema_children(schema.roots, out, indent, 0);
  return out;
}

std::string render_completion(const nlohmann::ordered_json& tree, int indent) {
  std::string out;
  write_tree_value(tree, out, indent, 0);
  return out;
}

Prompt build_prompt(const DocumentChunk& chunk, const ExtractionSchema& schema,
                    const CoordinateScheme& scheme,
                    const std::string& task_description) {
  DocumentSection section = render_document_section(chunk, scheme);
  Prompt prompt;
  prompt.text = assemble_prompt(section.text, render_schema(schema, scheme.json_indent),
                                task_description);
  prompt.doc_id = chunk.doc_id;
  prompt.chunk_index = chunk.chunk_index;
  prompt.id_map = std::move(section.id_map);
  return prompt;
}

PromptCost make_prompt_cost(const ExtractionSchema& schema,
                            const CoordinateScheme& scheme,
                            const TokenCounter& counter,
                            const std::string& task_description) {
  std::string schema_text = render_schema(schema, scheme.json_indent);
  return [schema_text, scheme, counter, task_description](
             std::span<const Segment> segments) -> std::size_t {
    return counter(assemble_prompt(render_lines(segments, scheme), schema_text,
                                   task_description));
  };
}

Prompt build_icl_prompt(std::span<const IclExemplar> exemplars,
                        const DocumentChunk& target,
                        const ExtractionSchema& schema,
                        const CoordinateScheme& scheme,
                        const TokenCounter& counter,
                        std::size_t max_input_tokens,
                        const std::string& task_description) {
  const std::string schema_text = render_schema(schema, scheme.json_indent);
  DocumentSection target_section = render_document_section(target, scheme);
  const std::string target_text =
      assemble_prompt(target_section.text, schema_text, task_description);

  std::vector<std::string> blocks;
  blocks.reserve(exemplars.size());
  for (const auto& ex : exemplars) {
    std::string block =
        assemble_prompt(render_lines(ex.chunk.segments, scheme), schema_text,
                        task_description);
    block += ex.completion_text;
    block += "\n</Extraction>\n";
    blocks.push_back(std::move(block));
  }

  std::size_t used = blocks.size();
  std::string text;
  while (true) {
    text.clear();
    for (std::size_t i = 0; i < used; ++i) text += blocks[i];
    text += target_text;
    if (counter(text) <= max_input_tokens) break;
    if (used == 0) {
      fail(ErrorCode::no_exemplar_fits,
           "prompt for " + target.doc_id + " chunk " +
               std::to_string(target.chunk_index) +
               " exceeds the token budget even without exemplars");
    }
    --used;
  }

  Prompt prompt;
  prompt.text = std::move(text);
  prompt.doc_id = target.doc_id;
  prompt.chunk_index = target.chunk_index;
  prompt.id_map = std::move(target_section.id_map);
  return prompt;
}

}  // namespace lmdx
