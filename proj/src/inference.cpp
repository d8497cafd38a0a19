#include "lmdx/inference.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "lmdx/error.hpp"

namespace lmdx {

using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::io_error, "sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string strip_extraction_terminator(std::string_view completion) {
  const std::string_view tag = "</Extraction>";
  const auto pos = completion.find(tag);
  if (pos == std::string_view::npos) return std::string(completion);
  std::string_view kept = completion.substr(0, pos);
  while (!kept.empty() && std::isspace(static_cast<unsigned char>(kept.back()))) {
    kept.remove_suffix(1);
  }
  return std::string(kept);
}

namespace {

class ReplayClient : public CompletionClient {
 public:
  explicit ReplayClient(const std::string& fixture_path) {
    std::ifstream in(fixture_path, std::ios::binary);
    if (!in) fail(ErrorCode::io_error, "cannot open fixture file: " + fixture_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorCode::malformed_input,
           "fixture file is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_array()) {
      fail(ErrorCode::malformed_input, "fixture file must be a JSON list");
    }
    for (const auto& entry : j) {
      if (!entry.is_object() || !entry.contains("prompt_sha256") ||
          !entry.contains("completions") || !entry["prompt_sha256"].is_string() ||
          !entry["completions"].is_array()) {
        fail(ErrorCode::malformed_input,
             "fixture entries need prompt_sha256 and completions");
      }
      std::vector<std::string> texts;
      for (const auto& c : entry["completions"]) {
        if (!c.is_string()) {
          fail(ErrorCode::malformed_input, "fixture completions must be strings");
        }
        texts.push_back(c.get<std::string>());
      }
      if (texts.empty()) {
        fail(ErrorCode::malformed_input, "fixture completion lists must be non-empty");
      }
      recorded_[entry["prompt_sha256"].get<std::string>()] = std::move(texts);
    }
  }

  std::vector<ClientCompletion> generate(const std::string& prompt,
                                         const SamplingConfig& config) override {
    const std::string key = sha256_hex(prompt);
    auto it = recorded_.find(key);
    if (it == recorded_.end()) {
      fail(ErrorCode::fixture_miss, "no recorded completions for prompt " + key);
    }
    std::vector<ClientCompletion> out;
    out.reserve(static_cast<std::size_t>(config.num_samples));
    for (int k = 0; k < config.num_samples; ++k) {
      out.push_back({it->second[static_cast<std::size_t>(k) % it->second.size()],
                     FinishReason::stop});
    }
    return out;
  }

 private:
  std::unordered_map<std::string, std::vector<std::string>> recorded_;
};

FinishReason finish_reason_from(const std::string& s) {
  if (s == "stop") return FinishReason::stop;
  if (s == "length") return FinishReason::length;
  return FinishReason::error;
}

void parse_endpoint(const std::string& url, std::string& host, int& port,
                    std::string& path) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    fail(ErrorCode::config_error,
         "endpoint must start with http:// (got: " + url + ")");
  }
  std::string rest = url.substr(scheme.size());
  const auto slash = rest.find('/');
  std::string hostport = rest.substr(0, slash);
  path = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = hostport.find(':');
  if (colon == std::string::npos) {
    host = hostport;
    port = 80;
  } else {
    host = hostport.substr(0, colon);
    try {
      port = std::stoi(hostport.substr(colon + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::config_error, "bad endpoint port in " + url);
    }
  }
  if (host.empty()) fail(ErrorCode::config_error, "endpoint has no host: " + url);
}

class HttpClient : public CompletionClient {
 public:
  explicit HttpClient(const std::string& endpoint_url) {
    parse_endpoint(endpoint_url, host_, port_, path_);
    if (const char* key = std::getenv("LMDX_API_KEY")) api_key_ = key;
  }

  std::vector<ClientCompletion> generate(const std::string& prompt,
                                         const SamplingConfig& config) override {
    httplib::Client cli(host_, port_);
    cli.set_connection_timeout(10);
    cli.set_read_timeout(120);
    httplib::Headers headers;
    if (!api_key_.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key_);
    }
    const json body{{"prompt", prompt},
                    {"temperature", config.temperature},
                    {"top_k", config.top_k},
                    {"candidate_count", config.num_samples},
                    {"seed", config.seed},
                    {"max_output_tokens", config.max_output_tokens}};
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      fail(ErrorCode::transport_error,
           "request to " + host_ + ":" + std::to_string(port_) +
               " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 401 || res->status == 403) {
      fail(ErrorCode::auth_error,
           "server rejected credentials (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
      fail(ErrorCode::transport_error,
           "server returned HTTP " + std::to_string(res->status));
    }
    json j;
    try {
      j = json::parse(res->body);
    } catch (const json::exception& e) {
      fail(ErrorCode::transport_error,
           "response body is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object() || !j.contains("candidates") || !j["candidates"].is_array()) {
      fail(ErrorCode::transport_error, "response lacks a candidates list");
    }
    std::vector<ClientCompletion> out;
    for (const auto& c : j["candidates"]) {
      if (!c.is_object() || !c.contains("text") || !c["text"].is_string()) {
        fail(ErrorCode::transport_error, "candidate entries need a text field");
      }
      ClientCompletion cc;
      cc.text = c["text"].get<std::string>();
      cc.finish_reason =
          c.contains("finish_reason") && c["finish_reason"].is_string()
              ? finish_reason_from(c["finish_reason"].get<std::string>())
              : FinishReason::stop;
      out.push_back(std::move(cc));
    }
    return out;
  }

 private:
  std::string host_;
  int port_ = 80;
  std::string path_ = "/";
  std::string api_key_;
};

}  // namespace

std::unique_ptr<CompletionClient> make_replay_client(const std::string& fixture_path) {
  return std::make_unique<ReplayClient>(fixture_path);
}

std::unique_ptr<CompletionClient> make_http_client(const std::string& endpoint_url) {
  return std::make_unique<HttpClient>(endpoint_url);
}

InferenceResult run_inference(std::span<const Prompt> prompts,
                              const SamplingConfig& config,
                              CompletionClient& client, int parallelism,
                              const RetryPolicy& retry,
                              const TokenCounter& budget_check) {
  if (budget_check) {
    for (const auto& p : prompts) {
      if (budget_check(p.text) > config.max_input_tokens) {
        fail(ErrorCode::budget_exceeded,
             "prompt for " + p.doc_id + " chunk " + std::to_string(p.chunk_index) +
                 " exceeds max_input_tokens; chunking should have prevented this");
      }
    }
  }

  struct Slot {
    bool ok = false;
    std::vector<ClientCompletion> completions;
    std::string message;
  };
  std::vector<Slot> slots(prompts.size());

  auto work_one = [&](std::size_t i) {
    const Prompt& p = prompts[i];
    int backoff = retry.initial_backoff_ms;
    for (int attempt = 1;; ++attempt) {
      try {
        auto result = client.generate(p.text, config);
        if (static_cast<int>(result.size()) != config.num_samples) {
          slots[i].message = "client returned " + std::to_string(result.size()) +
                             " completions, expected " +
                             std::to_string(config.num_samples);
          return;
        }
        slots[i].completions = std::move(result);
        slots[i].ok = true;
        return;
      } catch (const Error& e) {
        const bool retryable = e.code() == ErrorCode::transport_error;
        if (!retryable || attempt >= retry.attempts) {
          slots[i].message = e.what();
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff = static_cast<int>(backoff * retry.multiplier);
      }
    }
  };

  const int workers = std::max(1, std::min<int>(parallelism,
                                                static_cast<int>(prompts.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < prompts.size(); ++i) work_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < prompts.size();
             i = next.fetch_add(1)) {
          work_one(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  InferenceResult result;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const Prompt& p = prompts[i];
    if (!slots[i].ok) {
      result.failures.push_back({p.doc_id, p.chunk_index, slots[i].message});
      continue;
    }
    for (int k = 0; k < config.num_samples; ++k) {
      auto& c = slots[i].completions[static_cast<std::size_t>(k)];
      result.completions.push_back({strip_extraction_terminator(c.text), p.doc_id,
                                    p.chunk_index, k, c.finish_reason});
    }
  }
  return result;
}

}  // namespace lmdx
