#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lsr/config.hpp"
#include "lsr/core.hpp"

namespace lsr {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

// Per class with m samples the hold-out side receives round(fraction * m),
// clamped so the training side keeps at least one sample of every class.
SplitIndices stratified_split(std::span<const LabelId> labels, double fraction, std::uint64_t seed);

// Inverse-frequency weights n / (K_observed * count_c); 0 for classes never seen.
std::vector<double> class_weights(std::span<const LabelId> labels, std::size_t num_classes);

/// Anything that maps feature rows to class distributions.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::size_t num_classes() const = 0;
  virtual std::size_t dim() const = 0;
  virtual ProbabilityMatrix predict_proba(const FeatureMatrix& features) const = 0;
  virtual std::vector<std::uint8_t> serialize() const = 0;
};

struct TrainingInfo {
  int epochs = 0;                     // early-stopped epoch budget, reused for the full retrain
  double holdout_loss = 0.0;          // best hold-out loss during phase one
  double initial_holdout_loss = 0.0;  // hold-out loss of the zero model
  double step_size = 0.0;
  std::size_t train_rows = 0;
  std::size_t holdout_rows = 0;
};

/// Multinomial logistic regression, K x (d+1) weights in raw feature space.
class TrainedClassifier final : public Classifier {
 public:
  TrainedClassifier(std::size_t num_classes, std::size_t dim, std::vector<double> weights,
                    std::uint64_t label_hash = 0, TrainingInfo info = {});

  std::size_t num_classes() const override { return k_; }
  std::size_t dim() const override { return d_; }
  ProbabilityMatrix predict_proba(const FeatureMatrix& features) const override;
  std::vector<std::uint8_t> serialize() const override;
  static TrainedClassifier deserialize(std::span<const std::uint8_t> blob);

  const std::vector<double>& weights() const noexcept { return weights_; }
  std::uint64_t label_hash() const noexcept { return label_hash_; }
  const TrainingInfo& info() const noexcept { return info_; }

 private:
  std::size_t k_;
  std::size_t d_;
  std::vector<double> weights_;
  std::uint64_t label_hash_;
  TrainingInfo info_;
};

// Weighted mean cross-entropy (normalized by the weight total) plus
// (l2 / 2) * ||W||^2 over non-bias weights. Writes the gradient when `grad`
// is non-empty. Exposed so the tests can check it against finite differences.
double softmax_objective(const FeatureMatrix& features, std::span<const LabelId> labels,
                         std::span<const double> sample_weights, std::span<const double> weights,
                         std::size_t num_classes, double l2, std::span<double> grad);

// Two-phase training: early stopping on a stratified hold-out split, then a
// retrain from zero on every row for the early-stopped number of epochs.
TrainedClassifier train_classifier(const FeatureMatrix& features, std::span<const LabelId> labels,
                                   std::size_t num_classes, const ClassifierConfig& config,
                                   std::uint64_t label_hash = 0);

/// Pluggable training backend used by the engine.
class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual std::shared_ptr<const Classifier> train(const FeatureMatrix& features, std::span<const LabelId> labels,
                                                  std::size_t num_classes, std::uint64_t label_hash) const = 0;
  virtual std::shared_ptr<const Classifier> load(std::span<const std::uint8_t> blob) const = 0;
};

class LogisticBackend final : public ClassifierBackend {
 public:
  explicit LogisticBackend(ClassifierConfig config) : config_(config) {}
  std::shared_ptr<const Classifier> train(const FeatureMatrix& features, std::span<const LabelId> labels,
                                          std::size_t num_classes, std::uint64_t label_hash) const override;
  std::shared_ptr<const Classifier> load(std::span<const std::uint8_t> blob) const override;
  const ClassifierConfig& config() const noexcept { return config_; }

 private:
  ClassifierConfig config_;
};

// argmax per row, ties to the lower id.
std::vector<LabelId> argmax_rows(const ProbabilityMatrix& probs);

}  // namespace lsr
