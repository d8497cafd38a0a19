#pragma once

#include <string>

#include "lmdx/inference.hpp"
#include "lmdx/prompt.hpp"

namespace lmdx::cli {

struct ClientSpec {
  enum class Kind { replay, http };
  Kind kind = Kind::replay;
  std::string fixture_path;  // replay
  std::string endpoint;      // http
};

struct PipelineConfig {
  CoordinateScheme scheme;
  SamplingConfig sampling;
  ClientSpec client;
  std::string task_description = kDefaultTaskDescription;
  RetryPolicy retry;
  int parallel = 1;
};

// Declarative config file: JSON object with optional sections "scheme",
// "sampling", "client", "retry" and keys "task_description", "parallel".
// Unknown keys anywhere are rejected.
PipelineConfig load_config_file(const std::string& path);
PipelineConfig parse_config_json(const std::string& json_text);

// "replay:<fixture path>" or "http://host[:port]/path".
ClientSpec parse_client_spec(const std::string& text);

void validate_config(const PipelineConfig& config);

}  // namespace lmdx::cli
