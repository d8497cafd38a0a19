#include "cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lmdx/decoder.hpp"
#include "lmdx/error.hpp"
#include "lmdx/evaluator.hpp"
#include "lmdx/icl.hpp"
#include "lmdx/inference.hpp"

namespace lmdx::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path);
  out << content;
  if (!out) fail(ErrorCode::io_error, "write to " + path + " failed");
}

// File-name-safe rendering of a document id.
std::string sanitize(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    out += ok ? c : '_';
  }
  return out.empty() ? "doc" : out;
}

void report_failure(const std::string& context, const Error& e) {
  json line{{"error", error_code_name(e.code())},
            {"message", e.what()},
            {"context", context}};
  std::cerr << line.dump() << "\n";
}

std::string level_name(SegmentLevel level) {
  return level == SegmentLevel::word ? "word" : "line";
}

SegmentLevel level_from_name(const std::string& name) {
  if (name == "line") return SegmentLevel::line;
  if (name == "word") return SegmentLevel::word;
  fail(ErrorCode::malformed_input, "unknown segment level: " + name);
}

struct ManifestChunk {
  std::string doc_id;
  std::string doc_path;
  int page = 0;
  int chunk_index = 0;
  int first_segment = 0;
  int segment_count = 0;
  std::size_t token_count = 0;
};

std::vector<ManifestChunk> read_chunks_manifest(const std::string& path,
                                                SegmentLevel& level) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::malformed_input,
         "chunks manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("level") || !j.contains("chunks") ||
      !j["chunks"].is_array()) {
    fail(ErrorCode::malformed_input,
         "chunks manifest needs level and a chunks list");
  }
  level = level_from_name(j["level"].get<std::string>());
  std::vector<ManifestChunk> chunks;
  for (const auto& c : j["chunks"]) {
    ManifestChunk mc;
    mc.doc_id = c.at("doc_id").get<std::string>();
    mc.doc_path = c.at("doc_path").get<std::string>();
    mc.page = c.at("page").get<int>();
    mc.chunk_index = c.at("chunk_index").get<int>();
    mc.first_segment = c.at("first_segment").get<int>();
    mc.segment_count = c.at("segment_count").get<int>();
    mc.token_count = c.value("token_count", std::size_t{0});
    chunks.push_back(std::move(mc));
  }
  return chunks;
}

DocumentChunk rehydrate_chunk(const ManifestChunk& mc, const Document& doc,
                              SegmentLevel level) {
  if (mc.page < 0 || static_cast<std::size_t>(mc.page) >= doc.pages.size()) {
    fail(ErrorCode::malformed_input,
         "chunk references page " + std::to_string(mc.page) + " of " + mc.doc_id);
  }
  auto segments =
      segments_at_level(doc.pages[static_cast<std::size_t>(mc.page)], level);
  if (mc.first_segment < 0 || mc.segment_count <= 0 ||
      static_cast<std::size_t>(mc.first_segment + mc.segment_count) >
          segments.size()) {
    fail(ErrorCode::malformed_input,
         "chunk segment range is out of bounds for " + mc.doc_id);
  }
  DocumentChunk chunk;
  chunk.doc_id = mc.doc_id;
  chunk.source_page_index = mc.page;
  chunk.chunk_index = mc.chunk_index;
  chunk.first_segment_index = mc.first_segment;
  chunk.segments.assign(
      segments.begin() + mc.first_segment,
      segments.begin() + mc.first_segment + mc.segment_count);
  return chunk;
}

std::unique_ptr<CompletionClient> make_client(const ClientSpec& spec) {
  if (spec.kind == ClientSpec::Kind::replay) {
    if (spec.fixture_path.empty()) {
      fail(ErrorCode::config_error, "replay client needs a fixture path");
    }
    return make_replay_client(spec.fixture_path);
  }
  if (spec.endpoint.empty()) {
    fail(ErrorCode::config_error, "http client needs an endpoint");
  }
  return make_http_client(spec.endpoint);
}

// prompt -> inference -> decode for one document's chunks.
DocumentExtraction extract_document(std::span<const DocumentChunk> chunks,
                                    const ExtractionSchema& schema,
                                    const PipelineConfig& config,
                                    CompletionClient& client,
                                    std::vector<PromptFailure>& failures) {
  std::vector<Prompt> prompts;
  prompts.reserve(chunks.size());
  for (const auto& chunk : chunks) {
    prompts.push_back(
        build_prompt(chunk, schema, config.scheme, config.task_description));
  }
  InferenceResult inference =
      run_inference(prompts, config.sampling, client, config.parallel,
                    config.retry, default_token_counter());
  for (auto& f : inference.failures) failures.push_back(std::move(f));
  return decode_document(inference.completions, chunks, schema, config.scheme);
}

}  // namespace

int cmd_chunk(const std::vector<std::string>& doc_paths,
              const std::string& schema_path, const PipelineConfig& config,
              const std::string& out_path) {
  const ExtractionSchema schema = load_schema_file(schema_path);
  const auto cost = make_prompt_cost(schema, config.scheme,
                                     default_token_counter(),
                                     config.task_description);
  ordered_json manifest;
  manifest["level"] = level_name(config.scheme.segment_level);
  auto chunk_rows = ordered_json::array();
  bool partial = false;
  std::size_t doc_count = 0;
  for (const auto& path : doc_paths) {
    try {
      const Document doc = load_document_file(path);
      const auto chunks = chunk_document_at_level(
          doc, config.scheme.segment_level, config.sampling.max_input_tokens,
          cost);
      for (const auto& chunk : chunks) {
        ordered_json row;
        row["doc_id"] = chunk.doc_id;
        row["doc_path"] = path;
        row["page"] = chunk.source_page_index;
        row["chunk_index"] = chunk.chunk_index;
        row["first_segment"] = chunk.first_segment_index;
        row["segment_count"] = static_cast<int>(chunk.segments.size());
        row["token_count"] = cost(chunk.segments);
        chunk_rows.push_back(std::move(row));
      }
      ++doc_count;
    } catch (const Error& e) {
      report_failure(path, e);
      partial = true;
    }
  }
  manifest["chunks"] = chunk_rows;
  write_text_file(out_path, manifest.dump(1) + "\n");
  std::cout << "chunked " << doc_count << " document(s) into "
            << chunk_rows.size() << " chunk(s): " << out_path << "\n";
  return partial ? 1 : 0;
}

int cmd_prompt(const std::string& chunks_manifest_path,
               const std::string& schema_path, const PipelineConfig& config,
               const std::string& out_dir) {
  const ExtractionSchema schema = load_schema_file(schema_path);
  SegmentLevel level = SegmentLevel::line;
  const auto manifest = read_chunks_manifest(chunks_manifest_path, level);
  if (level != config.scheme.segment_level) {
    fail(ErrorCode::config_error,
         "chunks were cut at " + level_name(level) + " level but the scheme is " +
             level_name(config.scheme.segment_level) + " level");
  }
  std::map<std::string, Document> docs;
  auto prompt_rows = ordered_json::array();
  bool partial = false;
  for (const auto& mc : manifest) {
    try {
      auto it = docs.find(mc.doc_path);
      if (it == docs.end()) {
        it = docs.emplace(mc.doc_path, load_document_file(mc.doc_path)).first;
      }
      const DocumentChunk chunk = rehydrate_chunk(mc, it->second, level);
      const Prompt prompt =
          build_prompt(chunk, schema, config.scheme, config.task_description);
      const std::string file_name = sanitize(mc.doc_id) + ".chunk" +
                                    std::to_string(mc.chunk_index) +
                                    ".prompt.txt";
      const std::string file_path =
          (std::filesystem::path(out_dir) / file_name).string();
      write_text_file(file_path, prompt.text);
      ordered_json row;
      row["doc_id"] = mc.doc_id;
      row["chunk_index"] = mc.chunk_index;
      row["path"] = file_path;
      row["prompt_sha256"] = sha256_hex(prompt.text);
      prompt_rows.push_back(std::move(row));
    } catch (const Error& e) {
      report_failure(mc.doc_id + "#" + std::to_string(mc.chunk_index), e);
      partial = true;
    }
  }
  ordered_json manifest_json;
  manifest_json["prompts"] = prompt_rows;
  const std::string manifest_path =
      (std::filesystem::path(out_dir) / "prompts.json").string();
  write_text_file(manifest_path, manifest_json.dump(1) + "\n");
  std::cout << "wrote " << prompt_rows.size() << " prompt(s): " << manifest_path
            << "\n";
  return partial ? 1 : 0;
}

int cmd_extract(const std::vector<std::string>& doc_paths,
                const std::string& schema_path, const PipelineConfig& config,
                const std::string& out_dir) {
  const ExtractionSchema schema = load_schema_file(schema_path);
  const auto cost = make_prompt_cost(schema, config.scheme,
                                     default_token_counter(),
                                     config.task_description);
  const auto client = make_client(config.client);
  bool partial = false;
  std::size_t written = 0;
  for (const auto& path : doc_paths) {
    try {
      const Document doc = load_document_file(path);
      const auto chunks = chunk_document_at_level(
          doc, config.scheme.segment_level, config.sampling.max_input_tokens,
          cost);
      std::vector<PromptFailure> failures;
      const DocumentExtraction extraction =
          extract_document(chunks, schema, config, *client, failures);
      for (const auto& f : failures) {
        json line{{"error", "prompt_failure"},
                  {"message", f.message},
                  {"context", f.doc_id + "#" + std::to_string(f.chunk_index)}};
        std::cerr << line.dump() << "\n";
        partial = true;
      }
      const std::string out_path =
          (std::filesystem::path(out_dir) / (sanitize(doc.doc_id) + ".extraction.json"))
              .string();
      write_text_file(out_path, extraction_to_json(extraction).dump(1) + "\n");
      ++written;
    } catch (const Error& e) {
      report_failure(path, e);
      partial = true;
    }
  }
  std::cout << "extracted " << written << " document(s) into " << out_dir << "\n";
  return partial ? 1 : 0;
}

int cmd_decode(const std::string& fixture_path,
               const std::string& chunks_manifest_path,
               const std::string& schema_path, const PipelineConfig& config,
               const std::string& out_dir) {
  const ExtractionSchema schema = load_schema_file(schema_path);
  SegmentLevel level = SegmentLevel::line;
  const auto manifest = read_chunks_manifest(chunks_manifest_path, level);
  if (level != config.scheme.segment_level) {
    fail(ErrorCode::config_error,
         "chunks were cut at " + level_name(level) + " level but the scheme is " +
             level_name(config.scheme.segment_level) + " level");
  }
  const auto client = make_replay_client(fixture_path);

  // Chunks grouped per document, manifest order preserved.
  std::vector<std::string> doc_order;
  std::map<std::string, std::vector<const ManifestChunk*>> by_doc;
  for (const auto& mc : manifest) {
    if (!by_doc.count(mc.doc_id)) doc_order.push_back(mc.doc_id);
    by_doc[mc.doc_id].push_back(&mc);
  }

  bool partial = false;
  std::size_t written = 0;
  for (const auto& doc_id : doc_order) {
    try {
      const auto& rows = by_doc[doc_id];
      const Document doc = load_document_file(rows.front()->doc_path);
      std::vector<DocumentChunk> chunks;
      chunks.reserve(rows.size());
      for (const auto* mc : rows) {
        chunks.push_back(rehydrate_chunk(*mc, doc, level));
      }
      std::vector<PromptFailure> failures;
      const DocumentExtraction extraction =
          extract_document(chunks, schema, config, *client, failures);
      for (const auto& f : failures) {
        json line{{"error", "prompt_failure"},
                  {"message", f.message},
                  {"context", f.doc_id + "#" + std::to_string(f.chunk_index)}};
        std::cerr << line.dump() << "\n";
        partial = true;
      }
      const std::string out_path =
          (std::filesystem::path(out_dir) / (sanitize(doc_id) + ".extraction.json"))
              .string();
      write_text_file(out_path, extraction_to_json(extraction).dump(1) + "\n");
      ++written;
    } catch (const Error& e) {
      report_failure(doc_id, e);
      partial = true;
    }
  }
  std::cout << "decoded " << written << " document(s) into " << out_dir << "\n";
  return partial ? 1 : 0;
}

int cmd_eval(const std::vector<std::string>& prediction_paths,
             const std::vector<std::string>& groundtruth_paths,
             const std::vector<std::string>& doc_paths,
             const std::string& schema_path, const PipelineConfig& config,
             const std::string& out_path) {
  if (prediction_paths.size() != groundtruth_paths.size()) {
    fail(ErrorCode::malformed_input,
         "need one groundtruth file per prediction file");
  }
  if (!doc_paths.empty() && doc_paths.size() != prediction_paths.size()) {
    fail(ErrorCode::malformed_input,
         "when documents are given, need one per prediction file");
  }
  const ExtractionSchema schema = load_schema_file(schema_path);
  const MatchConfig match;

  std::vector<EvalEntity> pred_entities;
  std::vector<EvalEntity> gold_entities;
  std::map<std::string, std::pair<std::vector<EntityGroup>, std::vector<EntityGroup>>>
      groups;  // hierarchical root -> (pred, gold)
  for (const auto& root : schema.roots) {
    if (!root.is_leaf()) groups[root.name];
  }
  std::vector<DecodeTrace> traces;
  bool partial = false;

  for (std::size_t i = 0; i < prediction_paths.size(); ++i) {
    try {
      const json pred_json = json::parse(read_text_file(prediction_paths[i]));
      const DocumentExtraction extraction = extraction_from_json(pred_json);
      const ordered_json gold_tree =
          ordered_json::parse(read_text_file(groundtruth_paths[i]));
      Document doc;
      const Document* doc_ptr = nullptr;
      if (!doc_paths.empty()) {
        doc = load_document_file(doc_paths[i]);
        if (!extraction.doc_id.empty() && doc.doc_id != extraction.doc_id) {
          fail(ErrorCode::malformed_input,
               "document " + doc.doc_id + " does not match extraction " +
                   extraction.doc_id);
        }
        doc_ptr = &doc;
      }
      auto p = entities_from_extraction(extraction);
      auto g = entities_from_tree(gold_tree, schema, config.scheme, doc_ptr);
      pred_entities.insert(pred_entities.end(), p.begin(), p.end());
      gold_entities.insert(gold_entities.end(), g.begin(), g.end());
      for (auto& [root_name, pair] : groups) {
        auto pg = groups_from_extraction(extraction, root_name);
        auto gg = groups_from_tree(gold_tree, schema, root_name, config.scheme);
        pair.first.insert(pair.first.end(), pg.begin(), pg.end());
        pair.second.insert(pair.second.end(), gg.begin(), gg.end());
      }
      traces.push_back(extraction.trace);
    } catch (const Error& e) {
      report_failure(prediction_paths[i], e);
      partial = true;
    } catch (const json::exception& e) {
      report_failure(prediction_paths[i],
                     Error(ErrorCode::malformed_input, e.what()));
      partial = true;
    }
  }

  const MicroMetrics micro = micro_f1(pred_entities, gold_entities, match);
  const LocalizationReport loc =
      localization_accuracy(pred_entities, gold_entities, match);
  const ParsingErrorReport errors = parsing_error_report(traces);

  ordered_json report;
  ordered_json micro_json;
  micro_json["precision"] = micro.precision;
  micro_json["recall"] = micro.recall;
  micro_json["f1"] = micro.f1;
  micro_json["tp"] = micro.tp;
  micro_json["fp"] = micro.fp;
  micro_json["fn"] = micro.fn;
  auto rows = ordered_json::array();
  for (const auto& row : micro.per_type) {
    ordered_json r;
    r["type_path"] = row.type_path;
    r["tp"] = row.tp;
    r["fp"] = row.fp;
    r["fn"] = row.fn;
    r["precision"] = row.precision;
    r["recall"] = row.recall;
    r["f1"] = row.f1;
    rows.push_back(std::move(r));
  }
  micro_json["per_type"] = rows;
  report["micro"] = micro_json;
  ordered_json group_json = ordered_json::object();
  for (const auto& [root_name, pair] : groups) {
    group_json[root_name] = group_f1(pair.first, pair.second, match);
  }
  report["group_f1"] = group_json;
  ordered_json loc_json;
  loc_json["n_extracted"] = loc.n_extracted;
  loc_json["n_localized"] = loc.n_localized;
  loc_json["accuracy"] =
      loc.accuracy ? ordered_json(*loc.accuracy) : ordered_json(nullptr);
  report["localization"] = loc_json;
  ordered_json err_json;
  err_json["completions_total"] = errors.completions_total;
  err_json["invalid_json"] = errors.invalid_json;
  err_json["invalid_value_format"] = errors.invalid_value_format;
  err_json["text_not_found"] = errors.text_not_found;
  ordered_json rate_json;
  rate_json["invalid_json"] =
      format_error_rate(errors.invalid_json, errors.completions_total);
  rate_json["invalid_value_format"] =
      format_error_rate(errors.invalid_value_format, errors.completions_total);
  rate_json["text_not_found"] =
      format_error_rate(errors.text_not_found, errors.completions_total);
  err_json["rates"] = rate_json;
  report["parsing_errors"] = err_json;

  if (!out_path.empty()) {
    write_text_file(out_path, report.dump(1) + "\n");
  }

  char line[160];
  std::snprintf(line, sizeof(line),
                "micro precision %.4f recall %.4f f1 %.4f (tp %lld fp %lld fn %lld)\n",
                micro.precision, micro.recall, micro.f1,
                static_cast<long long>(micro.tp), static_cast<long long>(micro.fp),
                static_cast<long long>(micro.fn));
  std::cout << line;
  for (const auto& [root_name, pair] : groups) {
    std::snprintf(line, sizeof(line), "group f1 %-20s %.4f\n", root_name.c_str(),
                  group_f1(pair.first, pair.second, match));
    std::cout << line;
  }
  if (loc.accuracy) {
    std::snprintf(line, sizeof(line), "localization %lld/%lld = %.4f\n",
                  static_cast<long long>(loc.n_localized),
                  static_cast<long long>(loc.n_extracted), *loc.accuracy);
    std::cout << line;
  } else {
    std::cout << "localization undefined (nothing correctly extracted)\n";
  }
  std::cout << format_parsing_error_table(errors);
  return partial ? 1 : 0;
}

int cmd_stats(const std::vector<std::string>& doc_paths,
              const std::string& schema_path,
              const std::vector<std::string>& scheme_specs,
              const std::vector<std::string>& groundtruth_paths,
              const PipelineConfig& config, const std::string& out_path) {
  if (!groundtruth_paths.empty() && groundtruth_paths.size() != doc_paths.size()) {
    fail(ErrorCode::malformed_input,
         "when groundtruth files are given, need one per document");
  }
  const ExtractionSchema schema = load_schema_file(schema_path);
  std::vector<CoordinateScheme> schemes;
  if (scheme_specs.empty()) {
    schemes.push_back(config.scheme);
  } else {
    for (const auto& spec : scheme_specs) {
      schemes.push_back(scheme_from_string(spec));
    }
  }
  std::vector<Document> docs;
  docs.reserve(doc_paths.size());
  for (const auto& path : doc_paths) docs.push_back(load_document_file(path));
  std::vector<ordered_json> gold_trees;
  for (const auto& path : groundtruth_paths) {
    try {
      gold_trees.push_back(ordered_json::parse(read_text_file(path)));
    } catch (const json::exception& e) {
      fail(ErrorCode::malformed_input,
           "groundtruth " + path + " is not valid JSON: " + e.what());
    }
  }
  const auto stats = token_length_stats(docs, schema, schemes,
                                        default_token_counter(), gold_trees,
                                        config.scheme);
  const std::string tsv = format_token_stats_tsv(stats);
  if (out_path.empty()) {
    std::cout << tsv;
  } else {
    write_text_file(out_path, tsv);
    std::cout << "wrote token stats for " << docs.size() << " document(s): "
              << out_path << "\n";
  }
  return 0;
}

int cmd_icl(const std::string& pool_path, const std::string& target_doc_path,
            const std::string& schema_path, std::size_t exemplar_count,
            const std::string& method, const PipelineConfig& config,
            const std::string& out_path) {
  const ExtractionSchema schema = load_schema_file(schema_path);
  const auto embedder = make_hash_embedder();
  const ExemplarPool pool =
      load_pool_file(pool_path, *embedder, config.scheme.json_indent);
  const Document target = load_document_file(target_doc_path);

  std::vector<Exemplar> chosen;
  if (method == "random") {
    chosen = select_random(pool, exemplar_count, config.sampling.seed);
  } else if (method == "nearest") {
    chosen = select_nearest(pool, target, exemplar_count, *embedder);
  } else {
    fail(ErrorCode::config_error,
         "selection method must be random or nearest, got: " + method);
  }

  std::vector<IclExemplar> exemplars;
  exemplars.reserve(chosen.size());
  for (const auto& ex : chosen) {
    exemplars.push_back({exemplar_chunk(ex.document, config.scheme.segment_level),
                         ex.completion_text});
  }
  const DocumentChunk target_chunk =
      exemplar_chunk(target, config.scheme.segment_level);
  const Prompt prompt = build_icl_prompt(
      exemplars, target_chunk, schema, config.scheme, default_token_counter(),
      config.sampling.max_input_tokens, config.task_description);

  if (out_path.empty()) {
    std::cout << prompt.text;
  } else {
    write_text_file(out_path, prompt.text);
    std::cout << "selected";
    for (const auto& ex : chosen) std::cout << " " << ex.document.doc_id;
    std::cout << "; wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace lmdx::cli
