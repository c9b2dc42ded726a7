#pragma once

// Chat-completion client generator. Sends the rendered prompt to an HTTP
// endpoint, takes the reply text and pushes it through the same
// rewrite/parse/validate funnel as the offline generator.
//
// Only included by targets that link the HTTP client.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "conndiff/generator.hpp"

namespace conndiff {

struct RemoteGeneratorConfig {
  std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  std::string api_key_env = "CONNDIFF_API_KEY";
  int timeout_seconds = 60;
  int max_retries = 3;
  int max_in_flight = 4;
};

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error("endpoint must be an absolute URL: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

/// Reply text from a chat-completion body; falls back to the raw body when the
/// shape is unfamiliar, since the extractor only needs a trace block somewhere.
inline std::string completion_text(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) return body;
  if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const auto& c = j["choices"][0];
    if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string())
      return c["message"]["content"].get<std::string>();
    if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
  }
  if (j.contains("content") && j["content"].is_string()) return j["content"].get<std::string>();
  return body;
}

class RemoteGenerator final : public Generator {
public:
  explicit RemoteGenerator(RemoteGeneratorConfig config)
      : config_(std::move(config)),
        slots_(std::make_unique<std::counting_semaphore<1024>>(std::clamp(config_.max_in_flight, 1, 1024))) {
    if (config_.endpoint.empty()) throw Error("remote generator: endpoint is not configured");
  }

  GeneratorOutput generate(const GeneratorRequest& request) override {
    if (request.prompt_text.empty()) throw Error("generate: empty prompt text");
    slots_->acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{*slots_};
    return funnel(completion_text(post(request)));
  }

  std::string request_body(const GeneratorRequest& request) const {
    nlohmann::json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt_text}}});
    body["seed"] = request.seed;
    return body.dump();
  }

private:
  std::string post(const GeneratorRequest& request) {
    const auto url = split_url(config_.endpoint);
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_write_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);
    const auto body = request_body(request);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * (1 << std::min(attempt, 6))));
      auto res = client.Post(url.path, headers, body, "application/json");
      if (!res) {
        last_error = "transport: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) throw TransportError("remote generator: HTTP " + std::to_string(res->status));
      return res->body;
    }
    throw TransportError("remote generator: giving up after " + std::to_string(config_.max_retries + 1) +
                         " attempts (" + last_error + ")");
  }

  RemoteGeneratorConfig config_;
  std::unique_ptr<std::counting_semaphore<1024>> slots_;
};

}  // namespace conndiff
