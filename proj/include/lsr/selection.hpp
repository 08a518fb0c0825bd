#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lsr/config.hpp"
#include "lsr/core.hpp"

namespace lsr {

// Labels by descending probability, ties broken by ascending id.
std::vector<LabelId> rank(std::span<const double> prob_row);

CandidateSet top_k_select(std::span<const double> prob_row, std::size_t k);
// Shortest rank-order prefix whose cumulative mass reaches p; zero-mass labels never enter.
CandidateSet top_p_select(std::span<const double> prob_row, double p);
// { y : P(y) >= p * max P }, evaluated as P(y) / max P >= p.
CandidateSet min_p_select(std::span<const double> prob_row, double p);
// Min-p united with the current prediction, which goes last when below threshold.
CandidateSet min_p_plus_select(std::span<const double> prob_row, double p, LabelId current);

// w_i = n / (K_observed * count(pred_i)); sums to n.
std::vector<double> sample_weights(std::span<const LabelId> current_preds, std::size_t num_classes);

// One candidate set under `strategy`. `param` is k for top_k and p otherwise;
// `current` is only read by the Min-p+ variants.
CandidateSet select(std::span<const double> prob_row, Strategy strategy, double param, LabelId current);

// (1/n) sum_i w_i |set_i|; empty weights mean uniform weights of 1.
double weighted_mean_size(const ProbabilityMatrix& probs, Strategy strategy, double param,
                          std::span<const LabelId> current_preds, std::span<const double> weights);

struct ThresholdResult {
  double param = 0.0;          // p, or k for top_k
  double achieved = 0.0;       // weighted mean candidate-set size at `param`
};

inline constexpr double kThresholdResolution = 1e-4;

// Bisection on p for the target mean size, then an exact pass over the set
// boundaries left inside the final bracket. Ties go to the smaller sets.
ThresholdResult find_threshold(const ProbabilityMatrix& probs, Strategy strategy, double k_target,
                               std::span<const LabelId> current_preds, std::span<const double> weights);

// Min-p+ instance used by the refinement loop.
double find_optimal_threshold(const ProbabilityMatrix& probs, std::span<const LabelId> current_preds,
                              double k_target, std::span<const double> weights);

std::vector<CandidateSet> filter_label_space(const ProbabilityMatrix& probs, Strategy strategy, double param,
                                             std::span<const LabelId> current_preds);
// Ranking-only mode: every label, in rank order.
std::vector<CandidateSet> rank_label_space(const ProbabilityMatrix& probs);

}  // namespace lsr
