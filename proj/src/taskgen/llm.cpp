#include "surfer/taskgen/llm.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "surfer/common/errors.hpp"
#include "surfer/common/hash.hpp"

namespace surfer::taskgen {

HttpLlmClient::HttpLlmClient(std::string url, std::string token, int timeout_seconds)
    : token_(std::move(token)), timeout_seconds_(timeout_seconds) {
  constexpr std::string_view kScheme = "http://";
  if (url.rfind(kScheme, 0) != 0) throw ConfigError("LLM endpoint must be an http:// URL: " + url);
  const auto slash = url.find('/', kScheme.size());
  host_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

std::optional<std::string> HttpLlmClient::complete(const LlmRequest& request) {
  httplib::Client cli(host_);
  cli.set_connection_timeout(timeout_seconds_);
  cli.set_read_timeout(timeout_seconds_);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  const nlohmann::ordered_json body{
      {"prompt", request.prompt}, {"max_tokens", request.max_tokens}, {"temperature", request.temperature}};
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res || res->status != 200) return std::nullopt;
  const auto reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("text") || !reply["text"].is_string()) return std::nullopt;
  return reply["text"].get<std::string>();
}

std::unique_ptr<HttpLlmClient> HttpLlmClient::from_environment() {
  const char* url = std::getenv("SURFER_LLM_URL");
  if (!url || !*url) return nullptr;
  const char* token = std::getenv("SURFER_LLM_TOKEN");
  return std::make_unique<HttpLlmClient>(url, token ? token : "");
}

ReplayLlmClient::ReplayLlmClient(const std::filesystem::path& fixture) {
  std::istringstream in(read_file(fixture));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    replies_[j.at("prompt_hash").get<std::string>()] = j.at("text").get<std::string>();
  }
}

std::optional<std::string> ReplayLlmClient::complete(const LlmRequest& request) {
  auto it = replies_.find(hash_hex(request.prompt));
  if (it == replies_.end()) return std::nullopt;
  return it->second;
}

RecordingLlmClient::RecordingLlmClient(LlmClient& inner, std::filesystem::path fixture)
    : inner_(inner), fixture_(std::move(fixture)) {}

std::optional<std::string> RecordingLlmClient::complete(const LlmRequest& request) {
  auto reply = inner_.complete(request);
  if (reply) {
    if (fixture_.has_parent_path()) std::filesystem::create_directories(fixture_.parent_path());
    std::ofstream out(fixture_, std::ios::app | std::ios::binary);
    const nlohmann::ordered_json rec{{"prompt_hash", hash_hex(request.prompt)}, {"prompt", request.prompt}, {"text", *reply}};
    out << rec.dump() << '\n';
  }
  return reply;
}

}  // namespace surfer::taskgen
