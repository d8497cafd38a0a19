#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lmdx/chunker.hpp"
#include "lmdx/prompt.hpp"

namespace lmdx {

struct SamplingConfig {
  double temperature = 0.5;
  int top_k = 40;
  int num_samples = 16;
  std::uint64_t seed = 0;
  std::size_t max_input_tokens = 6144;
  std::size_t max_output_tokens = 2048;
};

enum class FinishReason { stop, length, error };

struct RawCompletion {
  std::string text;  // stripped of the first "</Extraction>" and what follows
  std::string doc_id;
  int chunk_index = 0;
  int sample_index = 0;
  FinishReason finish_reason = FinishReason::stop;
};

struct ClientCompletion {
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
};

// Completion backend. generate returns exactly config.num_samples completions
// or throws: transport_error is retryable, auth_error / fixture_miss are not.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::vector<ClientCompletion> generate(const std::string& prompt,
                                                 const SamplingConfig& config) = 0;
};

struct RetryPolicy {
  int attempts = 3;
  int initial_backoff_ms = 200;  // doubles per retry
  double multiplier = 2.0;
};

struct PromptFailure {
  std::string doc_id;
  int chunk_index = 0;
  std::string message;
};

struct InferenceResult {
  // Prompt order, then sample order; a failed prompt contributes nothing here
  // and one entry in failures.
  std::vector<RawCompletion> completions;
  std::vector<PromptFailure> failures;
};

// Fans prompts out to the client (up to `parallelism` concurrent requests),
// retries transport errors per policy, and reassembles results in prompt
// order. When a counter is supplied, a prompt over config.max_input_tokens
// raises budget_exceeded (chunking should have prevented it).
InferenceResult run_inference(std::span<const Prompt> prompts,
                              const SamplingConfig& config,
                              CompletionClient& client, int parallelism = 1,
                              const RetryPolicy& retry = {},
                              const TokenCounter& budget_check = nullptr);

// Replay client over a recorded fixture: JSON list of
// {"prompt_sha256": hex, "completions": [str,...]}. Unknown prompts raise
// fixture_miss; recorded lists are cycled when num_samples exceeds them.
std::unique_ptr<CompletionClient> make_replay_client(const std::string& fixture_path);

// JSON-over-HTTP client for "http://host[:port]/path" endpoints. Sends
// {"prompt","temperature","top_k","candidate_count","seed","max_output_tokens"}
// and expects {"candidates": [{"text","finish_reason"},...]}. If LMDX_API_KEY
// is set it is passed as a bearer token.
std::unique_ptr<CompletionClient> make_http_client(const std::string& endpoint_url);

// Adapter for tests and embedding custom backends.
class FunctionClient : public CompletionClient {
 public:
  using Fn = std::function<std::vector<ClientCompletion>(const std::string&,
                                                         const SamplingConfig&)>;
  explicit FunctionClient(Fn fn) : fn_(std::move(fn)) {}
  std::vector<ClientCompletion> generate(const std::string& prompt,
                                         const SamplingConfig& config) override {
    return fn_(prompt, config);
  }

 private:
  Fn fn_;
};

std::string sha256_hex(std::string_view data);

// Cuts at the first "</Extraction>" and trims trailing whitespace of the kept
// part; text without the terminator passes through unchanged.
std::string strip_extraction_terminator(std::string_view completion);

}  // namespace lmdx
