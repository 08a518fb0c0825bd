#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsr/classifier.hpp"
#include "lsr/config.hpp"
#include "lsr/core.hpp"
#include "lsr/llm.hpp"
#include "lsr/metrics.hpp"

namespace lsr {

struct RunHistory {
  RunConfig config;
  std::vector<IterationRecord> iterations;
  std::vector<std::shared_ptr<const Classifier>> classifiers;  // one per iteration, trained on its predictions
  PredictionVector final_predictions;
  std::vector<IterationRow> metrics;  // filled when ground truth is available
  std::vector<std::string> events;
  std::vector<LabelId> label_order;  // shuffled label list shown in every prompt
};

// Mode per sample across prediction rounds; ties go to the tied label seen
// in the latest round.
std::vector<LabelId> majority_vote(std::span<const std::vector<LabelId>> rounds);
PredictionVector majority_vote(std::span<const IterationRecord> history);

/// On-disk layout of one run:
///   run.config, events.log, metrics.records, final.records,
///   iter_<t>/{predictions.records, summary.json, classifier.blob}
class RunStore {
 public:
  explicit RunStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path iteration_dir(int t) const;
  bool iteration_complete(int t) const;

  void write_config(const nlohmann::ordered_json& snapshot) const;
  std::optional<nlohmann::ordered_json> read_config() const;

  void write_iteration(const IterationRecord& record, const Dataset& dataset,
                       std::span<const std::uint8_t> classifier_blob) const;
  IterationRecord read_iteration(int t, const Dataset& dataset) const;
  std::vector<std::uint8_t> read_classifier_blob(int t) const;

  void write_metrics(std::span<const IterationRow> rows) const;
  void write_final(const PredictionVector& final_predictions, const Dataset& dataset) const;
  void append_events(std::span<const std::string> lines) const;

 private:
  std::filesystem::path dir_;
};

struct RunOptions {
  std::optional<std::filesystem::path> run_dir;      // persist + resume when set
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();  // recorded in run.config
};

// Iterative label-space refinement. Iteration 0 asks the LLM over the full
// (shuffled) label list; iteration t >= 1 ranks and prunes labels with the
// classifier trained on iteration t-1's predictions. When a run directory
// holds completed iterations they are loaded instead of recomputed.
RunHistory run_lsr(const Dataset& dataset, const RunConfig& config, Labeler& labeler,
                   const ClassifierBackend& backend, const RunOptions& options = {});

// Repeated full-label-space passes aggregated by mode. The resample index only
// varies the draws when temperature > 0.
PredictionVector self_consistency(const Dataset& dataset, const RunConfig& config, Labeler& labeler, int resamples,
                                  double temperature);

// Classifier trained on the features replicated once per iteration, each copy
// labeled with that iteration's predictions.
TrainedClassifier distill(const Dataset& dataset, std::span<const IterationRecord> history,
                          const ClassifierConfig& config);

struct DirectInferOptions {
  Labeler* labeler = nullptr;  // null: plain argmax
  double k_target = 2.0;
  int batch_size = 10;
  std::uint64_t seed = 0;
};

struct DirectInference {
  PredictionVector predictions;
  std::vector<CandidateSet> candidates;  // with-LLM mode only
  std::optional<double> threshold;
  double weighted_mean_size = 0.0;
  std::vector<std::string> events;
};

DirectInference direct_infer(const Classifier& classifier, const Dataset& data, const DirectInferOptions& options = {});

// Labels the whole dataset in shuffled batches of `batch_size`, dispatching
// up to labeler.max_in_flight() batches at once. Unresolved labels fall back
// to the top candidate, else to `prior_mode`, else to the pass's own mode.
struct LabelingPass {
  PredictionVector predictions;
  std::vector<std::string> raw_labels;
  std::vector<bool> fallback;
  std::vector<std::string> events;
};

LabelingPass label_dataset(const Dataset& dataset, const std::vector<CandidateSet>* candidates, Labeler& labeler,
                           const LabelingContext& context, int batch_size, std::uint64_t shuffle_seed,
                           std::optional<LabelId> prior_mode = std::nullopt);

}  // namespace lsr
