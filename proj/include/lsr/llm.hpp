#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsr/config.hpp"
#include "lsr/core.hpp"
#include "lsr/error.hpp"

namespace lsr {

// ---------------------------------------------------------------- prompt

struct BatchCase {
  const SampleRecord* record = nullptr;
  std::size_t sample_index = 0;
  std::optional<std::vector<LabelId>> candidates;  // ranked suggestions, absent at iteration 0
};

// `label_order` permutes the label list shown in the context section; empty
// means label-id order. Either every case carries suggestions or none does.
std::string build_prompt(std::span<const BatchCase> cases, const LabelSpace& labels,
                         std::span<const LabelId> label_order = {});
std::string build_prompt(std::span<const SampleRecord> batch, const LabelSpace& labels,
                         const std::vector<CandidateSet>* suggestions, std::span<const LabelId> label_order = {});

// ---------------------------------------------------------------- parsing

struct CasePrediction {
  std::size_t case_index = 0;
  std::string analysis;
  std::string raw_label;
  std::optional<LabelId> label;  // resolved id, or unresolved
};

// First JSON object carrying "predictions", anywhere in the text. With
// `expected_cases`, every case 0..n-1 must be present.
std::vector<CasePrediction> parse_response(std::string_view text,
                                           std::optional<std::size_t> expected_cases = std::nullopt);

// Inverse of parse_response for well-formed payloads.
std::string serialize_predictions(std::span<const CasePrediction> predictions);

// exact -> normalized (quotes stripped) -> unique substring -> unresolved.
std::optional<LabelId> match_label(std::string_view raw, const LabelSpace& labels,
                                   const std::vector<LabelId>* candidates = nullptr);

// ---------------------------------------------------------------- labelers

struct LabelingContext {
  int iteration = 0;
  int draw = 0;  // resample index; stays 0 for deterministic decoding
  double temperature = 0.0;
  std::span<const LabelId> label_order;
};

struct BatchOutcome {
  std::vector<CasePrediction> cases;  // one per input case, in input order
  std::vector<std::string> events;
};

class Labeler {
 public:
  virtual ~Labeler() = default;
  virtual BatchOutcome label_batch(std::span<const BatchCase> cases, const LabelSpace& labels,
                                   const LabelingContext& context) = 0;
  virtual int max_in_flight() const { return 1; }
};

// Accuracy as a function of candidate-set size: accuracy_at_two up to two
// options, accuracy_at_full at K, log-linear in |S| between.
double mock_accuracy(std::size_t set_size, std::size_t num_classes, const MockParams& params);

// Simulated LLM. Emits only members of each case's candidate set (the full
// label space when absent); needs ground truth on every record.
std::vector<CasePrediction> mock_llm(std::span<const BatchCase> cases, const LabelSpace& labels,
                                     const MockParams& params, const LabelingContext& context);

class MockLabeler final : public Labeler {
 public:
  explicit MockLabeler(MockParams params, int max_in_flight = 1) : params_(params), in_flight_(max_in_flight) {}
  BatchOutcome label_batch(std::span<const BatchCase> cases, const LabelSpace& labels,
                           const LabelingContext& context) override;
  int max_in_flight() const override { return in_flight_; }

 private:
  MockParams params_;
  int in_flight_;
};

class ChatClient;

/// Prompts a chat-completions endpoint and resolves the returned labels.
class LiveLabeler final : public Labeler {
 public:
  LiveLabeler(std::shared_ptr<ChatClient> client, LlmConfig config);
  BatchOutcome label_batch(std::span<const BatchCase> cases, const LabelSpace& labels,
                           const LabelingContext& context) override;
  int max_in_flight() const override { return config_.max_in_flight; }

 private:
  std::shared_ptr<ChatClient> client_;
  LlmConfig config_;
};

std::unique_ptr<Labeler> make_labeler(const LlmConfig& config,
                                      std::function<void(const std::string&)> request_log = {});

}  // namespace lsr
