#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace surfer::taskgen {

struct LlmRequest {
  std::string prompt;
  int max_tokens = 64;
  double temperature = 0.7;
};

// Narrow text-in/text-out interface. complete() returns nullopt when the
// endpoint cannot be reached or replies with something unusable.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::optional<std::string> complete(const LlmRequest& request) = 0;
};

// POSTs {prompt, max_tokens, temperature} as JSON and expects {text}.
// Only plain http:// endpoints are supported.
class HttpLlmClient : public LlmClient {
 public:
  HttpLlmClient(std::string url, std::string token, int timeout_seconds = 30);
  std::optional<std::string> complete(const LlmRequest& request) override;

  // Reads SURFER_LLM_URL and SURFER_LLM_TOKEN; nullptr when the URL is unset.
  static std::unique_ptr<HttpLlmClient> from_environment();

 private:
  std::string host_;
  std::string path_;
  std::string token_;
  int timeout_seconds_;
};

// Fixture files hold one {"prompt_hash", "prompt", "text"} object per line.
class ReplayLlmClient : public LlmClient {
 public:
  explicit ReplayLlmClient(const std::filesystem::path& fixture);
  std::optional<std::string> complete(const LlmRequest& request) override;

 private:
  std::map<std::string, std::string> replies_;
};

// Forwards to another client and appends every answered exchange to a fixture.
class RecordingLlmClient : public LlmClient {
 public:
  RecordingLlmClient(LlmClient& inner, std::filesystem::path fixture);
  std::optional<std::string> complete(const LlmRequest& request) override;

 private:
  LlmClient& inner_;
  std::filesystem::path fixture_;
};

}  // namespace surfer::taskgen
