#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <semaphore>
#include <string>

#include "lsr/config.hpp"
#include "lsr/error.hpp"

namespace lsr {

class AuthError : public Error {
 public:
  explicit AuthError(const std::string& what) : Error(ErrorKind::llm, what) {}
};

struct RetryPolicy {
  int retries = 3;
  double base_seconds = 1.0;
  double factor = 2.0;
  double jitter = 0.1;  // fraction of the nominal delay added at random

  // Delay before retry number `attempt` (0-based), given u in [0,1).
  double delay(int attempt, double u) const;
};

using Sleeper = std::function<void(std::chrono::duration<double>)>;

struct EndpointUrl {
  std::string scheme_host_port;  // "https://api.example.com:443"
  std::string path_prefix;       // "/v1/openai"

  static EndpointUrl parse(const std::string& url);
};

/// Minimal chat-completions client: one user message per call, bounded
/// concurrency, exponential backoff on transport errors, 429 and 5xx.
class ChatClient {
 public:
  ChatClient(LlmConfig config, std::string api_key, Sleeper sleeper = {});

  // Reads the key from the environment variable named in the config.
  static std::shared_ptr<ChatClient> from_environment(const LlmConfig& config);

  std::string complete(const std::string& prompt, double temperature);

  void set_request_log(std::function<void(const std::string&)> log) { log_ = std::move(log); }
  int attempts_made() const { return attempts_.load(); }

 private:
  std::string post_once(const std::string& body, int& status, bool& transport_error);

  LlmConfig config_;
  std::string api_key_;
  EndpointUrl url_;
  RetryPolicy policy_;
  Sleeper sleeper_;
  std::counting_semaphore<1024> slots_;
  std::function<void(const std::string&)> log_;
  std::mutex log_mutex_;
  std::mutex rng_mutex_;
  std::mt19937_64 jitter_rng_;
  std::atomic<int> attempts_{0};
};

}  // namespace lsr
