#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "lmdx/error.hpp"
#include "lmdx/evaluator.hpp"

namespace {

int fatal(const lmdx::Error& e) {
  nlohmann::json line{{"error", lmdx::error_code_name(e.code())},
                      {"message", e.what()}};
  std::cerr << line.dump() << "\n";
  return 2;
}

int fatal_unexpected(const std::exception& e) {
  nlohmann::json line{{"error", "internal"}, {"message", e.what()}};
  std::cerr << line.dump() << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document information extraction via layout-tagged LLM prompts"};
  app.require_subcommand(1);
  // Lets the shared flags (--scheme, --client, ...) appear after the
  // subcommand name as well as before it.
  app.fallthrough();

  std::string config_path;
  std::string scheme_spec;
  std::size_t limit = 0;
  int samples = 0;
  std::uint64_t seed = 0;
  std::string client_spec;
  int parallel = 0;
  app.add_option("--config", config_path, "Pipeline config JSON file");
  app.add_option("--scheme", scheme_spec,
                 "Coordinate scheme as level/style/buckets[/indent]");
  app.add_option("--limit", limit, "Max prompt tokens per chunk");
  app.add_option("--samples", samples, "Completions per prompt");
  app.add_option("--seed", seed, "Sampling / selection seed");
  app.add_option("--client", client_spec,
                 "Completion backend: replay:<fixture> or http://host:port/path");
  app.add_option("--parallel", parallel, "Concurrent inference requests");

  std::vector<std::string> docs;
  std::string schema_path;
  std::string out;
  std::string chunks_path;
  std::string fixture_path;
  std::vector<std::string> preds;
  std::vector<std::string> golds;
  std::vector<std::string> scheme_list;
  std::string pool_path;
  std::string target_path;
  std::size_t exemplar_count = 4;
  std::string method = "random";

  CLI::App* chunk = app.add_subcommand("chunk", "Split documents into chunks");
  chunk->add_option("docs", docs, "Document JSON files")->required();
  chunk->add_option("--schema", schema_path, "Schema JSON file")->required();
  chunk->add_option("--out", out, "Chunks manifest path")->required();

  CLI::App* prompt = app.add_subcommand("prompt", "Render prompts for chunks");
  prompt->add_option("chunks", chunks_path, "Chunks manifest")->required();
  prompt->add_option("--schema", schema_path, "Schema JSON file")->required();
  prompt->add_option("--out", out, "Output directory")->required();

  CLI::App* extract =
      app.add_subcommand("extract", "End-to-end extraction for documents");
  extract->add_option("docs", docs, "Document JSON files")->required();
  extract->add_option("--schema", schema_path, "Schema JSON file")->required();
  extract->add_option("--out", out, "Output directory")->required();

  CLI::App* decode =
      app.add_subcommand("decode", "Offline decode from recorded completions");
  decode->add_option("fixture", fixture_path, "Recorded completions fixture")
      ->required();
  decode->add_option("--chunks", chunks_path, "Chunks manifest")->required();
  decode->add_option("--schema", schema_path, "Schema JSON file")->required();
  decode->add_option("--out", out, "Output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "Score extractions against gold");
  eval->add_option("--pred", preds, "Extraction JSON files")->required();
  eval->add_option("--gold", golds, "Groundtruth tree JSON files")->required();
  eval->add_option("--doc", docs, "Document JSON files (enables localization)");
  eval->add_option("--schema", schema_path, "Schema JSON file")->required();
  eval->add_option("--out", out, "Metrics JSON path");

  CLI::App* stats = app.add_subcommand("stats", "Token length percentiles");
  stats->add_option("docs", docs, "Document JSON files")->required();
  stats->add_option("--schema", schema_path, "Schema JSON file")->required();
  stats->add_option("--scheme-list", scheme_list,
                    "Schemes to compare (level/style/buckets[/indent])");
  stats->add_option("--gold", golds, "Groundtruth trees for target lengths");
  stats->add_option("--out", out, "Output TSV path (stdout when omitted)");

  CLI::App* icl = app.add_subcommand("icl", "Assemble an in-context prompt");
  icl->add_option("pool", pool_path, "Exemplar pool JSON file")->required();
  icl->add_option("--target", target_path, "Target document JSON file")
      ->required();
  icl->add_option("--schema", schema_path, "Schema JSON file")->required();
  icl->add_option("--n", exemplar_count, "Exemplars to select");
  icl->add_option("--method", method, "random or nearest");
  icl->add_option("--out", out, "Prompt output path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    lmdx::cli::PipelineConfig config;
    if (!config_path.empty()) {
      config = lmdx::cli::load_config_file(config_path);
    }
    if (app.count("--scheme")) {
      config.scheme = lmdx::scheme_from_string(scheme_spec);
    }
    if (app.count("--limit")) config.sampling.max_input_tokens = limit;
    if (app.count("--samples")) config.sampling.num_samples = samples;
    if (app.count("--seed")) config.sampling.seed = seed;
    if (app.count("--client")) {
      config.client = lmdx::cli::parse_client_spec(client_spec);
    }
    if (app.count("--parallel")) config.parallel = parallel;
    lmdx::cli::validate_config(config);

    if (chunk->parsed()) {
      return lmdx::cli::cmd_chunk(docs, schema_path, config, out);
    }
    if (prompt->parsed()) {
      return lmdx::cli::cmd_prompt(chunks_path, schema_path, config, out);
    }
    if (extract->parsed()) {
      return lmdx::cli::cmd_extract(docs, schema_path, config, out);
    }
    if (decode->parsed()) {
      return lmdx::cli::cmd_decode(fixture_path, chunks_path, schema_path,
                                   config, out);
    }
    if (eval->parsed()) {
      return lmdx::cli::cmd_eval(preds, golds, docs, schema_path, config, out);
    }
    if (stats->parsed()) {
      return lmdx::cli::cmd_stats(docs, schema_path, scheme_list, golds, config,
                                  out);
    }
    if (icl->parsed()) {
      return lmdx::cli::cmd_icl(pool_path, target_path, schema_path,
                                exemplar_count, method, config, out);
    }
    std::cerr << R"({"error": "config_error", "message": "no subcommand"})"
              << "\n";
    return 2;
  } catch (const lmdx::Error& e) {
    return fatal(e);
  } catch (const std::exception& e) {
    return fatal_unexpected(e);
  }
}
