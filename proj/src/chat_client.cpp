#include "lsr/chat_client.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace lsr {

using nlohmann::json;

double RetryPolicy::delay(int attempt, double u) const {
  const double nominal = base_seconds * std::pow(factor, attempt);
  return nominal * (1.0 + jitter * u);
}

EndpointUrl EndpointUrl::parse(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw config_error("endpoint must start with http:// or https://: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw config_error("unsupported endpoint scheme '" + scheme + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  EndpointUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  out.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

ChatClient::ChatClient(LlmConfig config, std::string api_key, Sleeper sleeper)
    : config_(std::move(config)),
      api_key_(std::move(api_key)),
      url_(EndpointUrl::parse(config_.endpoint)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); })),
      slots_(std::clamp(config_.max_in_flight, 1, 1024)),
      jitter_rng_(std::random_device{}()) {
  policy_.retries = config_.retries;
  policy_.base_seconds = config_.backoff_base_seconds;
}

std::shared_ptr<ChatClient> ChatClient::from_environment(const LlmConfig& config) {
  const char* key = std::getenv(config.api_key_env.c_str());
  if (!key || !*key) throw config_error("environment variable " + config.api_key_env + " holds no API key");
  return std::make_shared<ChatClient>(config, key);
}

std::string ChatClient::post_once(const std::string& body, int& status, bool& transport_error) {
  httplib::Client cli(url_.scheme_host_port);
  const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
  cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = cli.Post(url_.path_prefix + "/chat/completions", headers, body, "application/json");
  if (!res) {
    transport_error = true;
    status = 0;
    return httplib::to_string(res.error());
  }
  transport_error = false;
  status = res->status;
  return res->body;
}

std::string ChatClient::complete(const std::string& prompt, double temperature) {
  const json request = {{"model", config_.model},
                        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                        {"temperature", temperature}};
  const std::string body = request.dump();

  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};

  std::string last_error;
  for (int attempt = 0; attempt <= policy_.retries; ++attempt) {
    if (attempt > 0) {
      double u;
      {
        std::lock_guard lock(rng_mutex_);
        u = static_cast<double>(jitter_rng_() >> 11) * 0x1.0p-53;
      }
      sleeper_(std::chrono::duration<double>(policy_.delay(attempt - 1, u)));
    }
    ++attempts_;
    int status = 0;
    bool transport_error = false;
    const std::string response = post_once(body, status, transport_error);
    if (log_) {
      std::lock_guard lock(log_mutex_);
      log_(json{{"attempt", attempt}, {"status", status}, {"request", request}, {"response", response}}.dump());
    }
    if (transport_error) {
      last_error = "transport error: " + response;
      continue;
    }
    if (status == 401 || status == 403) throw AuthError("authentication failed (HTTP " + std::to_string(status) + ")");
    if (status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300)
      throw llm_error("request rejected (HTTP " + std::to_string(status) + "): " + response.substr(0, 200));

    const json payload = json::parse(response, nullptr, false);
    if (payload.is_discarded()) throw llm_error("response body is not JSON");
    try {
      return payload.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw llm_error("response lacks choices[0].message.content");
    }
  }
  throw llm_error("giving up after " + std::to_string(policy_.retries + 1) + " attempts: " + last_error);
}

}  // namespace lsr
