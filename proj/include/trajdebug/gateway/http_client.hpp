#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "trajdebug/gateway/chat_client.hpp"

namespace trajdbg {

struct HttpClientConfig {
  std::string base_url;        // e.g. "http://localhost:8000/v1"
  std::string api_key;         // sent as Bearer token when non-empty
  std::string default_model;   // used when the request leaves model_id empty
  int timeout_seconds = 60;
  int max_retries = 3;         // transient transport failures only
  int retry_backoff_ms = 250;  // doubled per retry

  // TRAJDBG_ENDPOINT / TRAJDBG_API_KEY / TRAJDBG_MODEL
  static HttpClientConfig from_environment() {
    HttpClientConfig cfg;
    if (const char* v = std::getenv("TRAJDBG_ENDPOINT")) cfg.base_url = v;
    if (const char* v = std::getenv("TRAJDBG_API_KEY")) cfg.api_key = v;
    if (const char* v = std::getenv("TRAJDBG_MODEL")) cfg.default_model = v;
    return cfg;
  }
};

namespace detail {

inline nlohmann::json build_chat_body(const ChatRequest& request,
                                      const std::string& fallback_model) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  nlohmann::json body{{"model", request.model_id.empty() ? fallback_model : request.model_id},
                      {"messages", messages},
                      {"temperature", request.temperature}};
  if (request.max_output_tokens) body["max_tokens"] = *request.max_output_tokens;
  return body;
}

inline Result<Completion> parse_chat_response(const std::string& body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) return err(Errc::transport_error, "response is not JSON");
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    return err(Errc::transport_error, "response has no choices");
  const auto& message = j["choices"][0]["message"];
  if (!message.contains("content") || !message["content"].is_string())
    return err(Errc::transport_error, "response choice has no content");
  Completion c;
  c.text = message["content"].get<std::string>();
  c.backend = Backend::live;
  if (j.contains("usage") && j["usage"].is_object()) {
    const auto& u = j["usage"];
    c.usage.prompt_tokens = u.value("prompt_tokens", int64_t{0});
    c.usage.completion_tokens = u.value("completion_tokens", int64_t{0});
  }
  return c;
}

// "http://host:port/v1" -> ("http://host:port", "/v1/chat/completions")
inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  std::string url = base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  size_t scheme = url.find("://");
  size_t path_start = scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
  if (path_start == std::string::npos) return {url, "/chat/completions"};
  return {url.substr(0, path_start), url.substr(path_start) + "/chat/completions"};
}

}  // namespace detail

// OpenAI-compatible chat-completions backend over plain HTTP, with bounded
// retry on transport failures and 5xx responses.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {}

  const HttpClientConfig& config() const { return config_; }

 protected:
  Result<Completion> do_complete(const ChatRequest& request) override {
    if (config_.base_url.empty())
      return err(Errc::transport_error, "no endpoint configured (TRAJDBG_ENDPOINT)");
    const auto [host, path] = detail::split_base_url(config_.base_url);
    const std::string body = detail::build_chat_body(request, config_.default_model).dump();

    int backoff_ms = config_.retry_backoff_ms;
    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
      }
      httplib::Client client(host);
      client.set_connection_timeout(config_.timeout_seconds);
      client.set_read_timeout(config_.timeout_seconds);
      httplib::Headers headers;
      if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = client.Post(path, headers, body, "application/json");
      if (!res) {
        last_failure = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_failure = "server error " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        return err(Errc::transport_error,
                   "HTTP " + std::to_string(res->status) + ": " + res->body);
      return detail::parse_chat_response(res->body);
    }
    return err(Errc::transport_error, last_failure + " after " +
                                          std::to_string(config_.max_retries + 1) + " attempts");
  }

 private:
  HttpClientConfig config_;
};

}  // namespace trajdbg
