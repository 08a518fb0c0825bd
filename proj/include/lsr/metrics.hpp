#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsr/core.hpp"

namespace lsr {

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  double macro_f1 = 0.0;
  std::vector<ClassScore> per_class;
  std::map<std::size_t, double> hit_at_k;
  std::vector<std::size_t> support;
};

// Zero denominators give 0; every one of the K classes enters the mean.
MetricsReport macro_f1(std::span<const LabelId> preds, std::span<const LabelId> truth, std::size_t num_classes);

// Fraction of samples whose truth is within the first min(k, |ranking|) entries.
double hit_at_k(std::span<const std::vector<LabelId>> rankings, std::span<const LabelId> truth, std::size_t k);
double candidate_hit_rate(std::span<const CandidateSet> sets, std::span<const LabelId> truth);

// Labels by descending cosine similarity to each sample, ties by lower id.
std::vector<std::vector<LabelId>> embedding_rank(const FeatureMatrix& sample_embeddings,
                                                 const FeatureMatrix& label_embeddings);

struct IterationRow {
  int t = 0;
  double macro_f1 = 0.0;
  double vote_macro_f1 = 0.0;
  std::optional<double> mean_candidate_size;
  std::optional<double> candidate_hit_rate;
};

std::vector<IterationRow> iteration_report(std::span<const IterationRecord> history, std::span<const LabelId> truth,
                                           std::size_t num_classes);

// Right-aligned plain-text table.
std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);
std::string format_iteration_report(std::span<const IterationRow> rows);
std::string fixed(double v, int digits = 4);

}  // namespace lsr
