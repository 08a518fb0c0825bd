#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace lsr {

enum class Strategy { top_k, top_p, min_p, min_p_plus, min_p_plus_weighted };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

/// Target average candidate-set size, or "full" (rank only, no reduction).
class KTarget {
 public:
  KTarget() = default;
  static KTarget full() { return KTarget{}; }
  static KTarget value(double k) { return KTarget{k}; }
  static KTarget parse(std::string_view text);

  bool is_full() const noexcept { return !k_.has_value(); }
  double get() const { return k_.value(); }
  std::string str() const;

  bool operator==(const KTarget&) const = default;

 private:
  explicit KTarget(double k) : k_(k) {}
  std::optional<double> k_;
};

struct ClassifierConfig {
  double learning_rate = 0.1;
  double l2 = 1e-3;
  int max_epochs = 500;
  int patience = 20;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
  bool class_weighting = true;

  void validate() const;
};

struct MockParams {
  double accuracy_at_full = 0.6;
  double accuracy_at_two = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class LlmMode { live, mock };

struct LlmConfig {
  LlmMode mode = LlmMode::mock;
  std::string endpoint = "https://api.deepinfra.com/v1/openai";
  std::string model = "meta-llama/Meta-Llama-3.1-70B-Instruct";
  std::string api_key_env = "LSR_API_KEY";
  double temperature = 0.0;
  int max_in_flight = 4;
  int retries = 3;
  double backoff_base_seconds = 1.0;
  double timeout_seconds = 120.0;
  bool log_requests = false;
  MockParams mock;

  void validate() const;
};

struct RunConfig {
  KTarget k_target = KTarget::value(2.0);
  int iterations = 15;
  int batch_size = 10;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::min_p_plus_weighted;
  ClassifierConfig classifier;
  LlmConfig llm;

  void validate() const;
};

// JSON mapping. from_json starts from defaults, so a file only needs the keys
// it overrides; sub-seeds left unset are derived from the root seed.
nlohmann::ordered_json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::ordered_json& j);

// Applies "a.b.c=value" style overrides; unknown keys are config errors.
void apply_override(nlohmann::ordered_json& j, std::string_view assignment);

}  // namespace lsr
