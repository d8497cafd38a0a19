#include "cli/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "lmdx/error.hpp"

namespace lmdx::cli {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const char* section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      fail(ErrorCode::config_error,
           std::string("unknown config key in ") + section + ": " + it.key());
    }
  }
}

void require_object(const json& value, const char* section) {
  if (!value.is_object()) {
    fail(ErrorCode::config_error,
         std::string(section) + " section must be a JSON object");
  }
}

void parse_scheme_section(const json& s, CoordinateScheme& scheme) {
  require_object(s, "scheme");
  check_keys(s, {"segment_level", "identifier_style", "buckets", "json_indent"},
             "scheme");
  if (s.contains("segment_level")) {
    const std::string level = s["segment_level"].get<std::string>();
    if (level == "line") {
      scheme.segment_level = SegmentLevel::line;
    } else if (level == "word") {
      scheme.segment_level = SegmentLevel::word;
    } else {
      fail(ErrorCode::config_error, "unknown segment_level: " + level);
    }
  }
  if (s.contains("identifier_style")) {
    const std::string style = s["identifier_style"].get<std::string>();
    if (style == "center_2") {
      scheme.identifier_style = IdentifierStyle::center_2;
    } else if (style == "corners_4") {
      scheme.identifier_style = IdentifierStyle::corners_4;
    } else if (style == "line_index") {
      scheme.identifier_style = IdentifierStyle::line_index;
    } else {
      fail(ErrorCode::config_error, "unknown identifier_style: " + style);
    }
  }
  if (s.contains("buckets")) scheme.buckets = s["buckets"].get<int>();
  if (s.contains("json_indent")) scheme.json_indent = s["json_indent"].get<int>();
}

void parse_sampling_section(const json& s, SamplingConfig& sampling) {
  require_object(s, "sampling");
  check_keys(s,
             {"temperature", "top_k", "num_samples", "seed", "max_input_tokens",
              "max_output_tokens"},
             "sampling");
  if (s.contains("temperature")) sampling.temperature = s["temperature"].get<double>();
  if (s.contains("top_k")) sampling.top_k = s["top_k"].get<int>();
  if (s.contains("num_samples")) sampling.num_samples = s["num_samples"].get<int>();
  if (s.contains("seed")) sampling.seed = s["seed"].get<std::uint64_t>();
  if (s.contains("max_input_tokens")) {
    sampling.max_input_tokens = s["max_input_tokens"].get<std::size_t>();
  }
  if (s.contains("max_output_tokens")) {
    sampling.max_output_tokens = s["max_output_tokens"].get<std::size_t>();
  }
}

void parse_client_section(const json& c, ClientSpec& client) {
  require_object(c, "client");
  check_keys(c, {"kind", "fixture", "endpoint"}, "client");
  if (c.contains("kind")) {
    const std::string kind = c["kind"].get<std::string>();
    if (kind == "replay") {
      client.kind = ClientSpec::Kind::replay;
    } else if (kind == "http") {
      client.kind = ClientSpec::Kind::http;
    } else {
      fail(ErrorCode::config_error, "unknown client kind: " + kind);
    }
  }
  if (c.contains("fixture")) client.fixture_path = c["fixture"].get<std::string>();
  if (c.contains("endpoint")) client.endpoint = c["endpoint"].get<std::string>();
}

void parse_retry_section(const json& r, RetryPolicy& retry) {
  require_object(r, "retry");
  check_keys(r, {"attempts", "initial_backoff_ms", "multiplier"}, "retry");
  if (r.contains("attempts")) retry.attempts = r["attempts"].get<int>();
  if (r.contains("initial_backoff_ms")) {
    retry.initial_backoff_ms = r["initial_backoff_ms"].get<int>();
  }
  if (r.contains("multiplier")) retry.multiplier = r["multiplier"].get<double>();
}

}  // namespace

PipelineConfig parse_config_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::config_error,
         "config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) {
    fail(ErrorCode::config_error, "config must be a JSON object");
  }
  check_keys(j, {"scheme", "sampling", "client", "task_description", "retry",
                 "parallel"},
             "config");
  PipelineConfig config;
  if (j.contains("scheme")) parse_scheme_section(j["scheme"], config.scheme);
  if (j.contains("sampling")) parse_sampling_section(j["sampling"], config.sampling);
  if (j.contains("client")) parse_client_section(j["client"], config.client);
  if (j.contains("task_description")) {
    config.task_description = j["task_description"].get<std::string>();
  }
  if (j.contains("retry")) parse_retry_section(j["retry"], config.retry);
  if (j.contains("parallel")) config.parallel = j["parallel"].get<int>();
  validate_config(config);
  return config;
}

PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_json(buffer.str());
}

ClientSpec parse_client_spec(const std::string& text) {
  ClientSpec spec;
  if (text.rfind("replay:", 0) == 0) {
    spec.kind = ClientSpec::Kind::replay;
    spec.fixture_path = text.substr(7);
    if (spec.fixture_path.empty()) {
      fail(ErrorCode::config_error, "replay client needs a fixture path");
    }
    return spec;
  }
  if (text.rfind("http://", 0) == 0) {
    spec.kind = ClientSpec::Kind::http;
    spec.endpoint = text;
    return spec;
  }
  fail(ErrorCode::config_error,
       "client must be replay:<fixture> or an http:// endpoint, got: " + text);
}

void validate_config(const PipelineConfig& config) {
  if (config.scheme.buckets < 2) {
    fail(ErrorCode::config_error, "scheme buckets must be at least 2");
  }
  if (config.scheme.json_indent < 0) {
    fail(ErrorCode::config_error, "scheme json_indent must be non-negative");
  }
  if (config.sampling.num_samples < 1) {
    fail(ErrorCode::config_error, "sampling num_samples must be at least 1");
  }
  if (config.sampling.max_input_tokens == 0) {
    fail(ErrorCode::config_error, "sampling max_input_tokens must be positive");
  }
  if (config.retry.attempts < 1) {
    fail(ErrorCode::config_error, "retry attempts must be at least 1");
  }
  if (config.parallel < 1) {
    fail(ErrorCode::config_error, "parallel must be at least 1");
  }
}

}  // namespace lmdx::cli
