#include "lsr/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lsr/error.hpp"
#include "lsr/kernels.hpp"

namespace lsr {

std::vector<LabelId> rank(std::span<const double> prob_row) {
  std::vector<LabelId> order(prob_row.size());
  std::iota(order.begin(), order.end(), LabelId{0});
  std::stable_sort(order.begin(), order.end(), [&](LabelId a, LabelId b) { return prob_row[a] > prob_row[b]; });
  return order;
}

CandidateSet top_k_select(std::span<const double> prob_row, std::size_t k) {
  if (k < 1 || k > prob_row.size())
    throw config_error("top_k: k=" + std::to_string(k) + " outside [1," + std::to_string(prob_row.size()) + "]");
  auto order = rank(prob_row);
  order.resize(k);
  return {0, std::move(order), static_cast<double>(k)};
}

CandidateSet top_p_select(std::span<const double> prob_row, double p) {
  const auto order = rank(prob_row);
  CandidateSet set{0, {}, p};
  double cumulative = 0.0;
  for (auto id : order) {
    if (!set.labels.empty() && prob_row[id] <= 0.0) break;
    set.labels.push_back(id);
    cumulative += prob_row[id];
    if (cumulative >= p) break;
  }
  return set;
}

CandidateSet min_p_select(std::span<const double> prob_row, double p) {
  const auto order = rank(prob_row);
  const double mx = prob_row[order.front()];
  CandidateSet set{0, {}, p};
  for (auto id : order) {
    if (prob_row[id] / mx >= p)
      set.labels.push_back(id);
    else
      break;
  }
  return set;
}

CandidateSet min_p_plus_select(std::span<const double> prob_row, double p, LabelId current) {
  if (current >= prob_row.size()) throw data_error("current prediction is not a valid label id");
  auto set = min_p_select(prob_row, p);
  if (!set.contains(current)) set.labels.push_back(current);
  return set;
}

std::vector<double> sample_weights(std::span<const LabelId> current_preds, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (auto y : current_preds) {
    if (y >= num_classes) throw data_error("prediction id out of range in sample_weights");
    ++counts[y];
  }
  const auto observed = static_cast<double>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  const auto n = static_cast<double>(current_preds.size());
  std::vector<double> w;
  w.reserve(current_preds.size());
  for (auto y : current_preds) w.push_back(n / (observed * static_cast<double>(counts[y])));
  return w;
}

CandidateSet select(std::span<const double> prob_row, Strategy strategy, double param, LabelId current) {
  switch (strategy) {
    case Strategy::top_k: return top_k_select(prob_row, static_cast<std::size_t>(param));
    case Strategy::top_p: return top_p_select(prob_row, param);
    case Strategy::min_p: return min_p_select(prob_row, param);
    case Strategy::min_p_plus:
    case Strategy::min_p_plus_weighted: return min_p_plus_select(prob_row, param, current);
  }
  throw config_error("unknown strategy");
}

namespace {

bool uses_prediction(Strategy s) { return s == Strategy::min_p_plus || s == Strategy::min_p_plus_weighted; }

void check_inputs(const ProbabilityMatrix& probs, Strategy strategy, std::span<const LabelId> preds,
                  std::span<const double> weights) {
  if (uses_prediction(strategy) && preds.size() != probs.rows())
    throw data_error("current predictions do not match the probability rows");
  if (!weights.empty() && weights.size() != probs.rows())
    throw data_error("sample weights do not match the probability rows");
  for (auto y : preds)
    if (y >= probs.cols()) throw data_error("current prediction is not a valid label id");
}

// Weighted mean size as a function of the threshold, plus the exact set of
// threshold values at which some sample's set changes size.
class SizeFunction {
 public:
  SizeFunction(const ProbabilityMatrix& probs, Strategy strategy, std::span<const LabelId> preds,
               std::span<const double> weights)
      : probs_(probs), strategy_(strategy), weights_(weights), sizes_(probs.rows()) {
    if (uses_prediction(strategy)) preds_ = preds;
  }

  double operator()(double p) {
    const std::size_t n = probs_.rows();
    if (strategy_ == Strategy::top_p) {
      for (std::size_t i = 0; i < n; ++i)
        sizes_[i] = static_cast<std::uint32_t>(top_p_select(probs_.row(i), p).size());
    } else {
      kernels::parallel::min_p_sizes({n, 0, probs_.cols()}, probs_.data(), p, preds_, sizes_);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += (weights_.empty() ? 1.0 : weights_[i]) * sizes_[i];
    return total / static_cast<double>(n);
  }

  // Largest p' >= p giving the same ordered sets as p (Min-p family only).
  double piece_end(double p) const {
    double end = 1.0;
    const std::size_t k = probs_.cols();
    for (std::size_t i = 0; i < probs_.rows(); ++i) {
      const auto row = probs_.row(i);
      double mx = 0.0;
      for (std::size_t y = 0; y < k; ++y) mx = std::max(mx, row[y]);
      for (std::size_t y = 0; y < k; ++y) {
        const double r = row[y] / mx;
        if (r >= p) end = std::min(end, r);
      }
    }
    return end;
  }

  // Boundaries in [lo, hi]: ratios P(y)/max P for Min-p, prefix masses for Top-p.
  std::vector<double> boundaries(double lo, double hi) const {
    std::vector<double> out;
    const std::size_t k = probs_.cols();
    for (std::size_t i = 0; i < probs_.rows(); ++i) {
      const auto row = probs_.row(i);
      if (strategy_ == Strategy::top_p) {
        double c = 0.0;
        for (auto id : rank(row)) {
          c += row[id];
          if (c >= lo && c <= hi) out.push_back(c);
        }
      } else {
        double mx = 0.0;
        for (std::size_t y = 0; y < k; ++y) mx = std::max(mx, row[y]);
        for (std::size_t y = 0; y < k; ++y) {
          const double r = row[y] / mx;
          if (r >= lo && r <= hi) out.push_back(r);
        }
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  const ProbabilityMatrix& probs_;
  Strategy strategy_;
  std::span<const LabelId> preds_;
  std::span<const double> weights_;
  std::vector<std::uint32_t> sizes_;
};

constexpr double kSizeSlack = 1e-9;

}  // namespace

double weighted_mean_size(const ProbabilityMatrix& probs, Strategy strategy, double param,
                          std::span<const LabelId> current_preds, std::span<const double> weights) {
  check_inputs(probs, strategy, current_preds, weights);
  if (probs.rows() == 0) return 0.0;
  if (strategy == Strategy::top_k) {
    double total = 0.0;
    const auto k = static_cast<double>(top_k_select(probs.row(0), static_cast<std::size_t>(param)).size());
    for (std::size_t i = 0; i < probs.rows(); ++i) total += (weights.empty() ? 1.0 : weights[i]) * k;
    return total / static_cast<double>(probs.rows());
  }
  SizeFunction size(probs, strategy, current_preds, weights);
  return size(param);
}

ThresholdResult find_threshold(const ProbabilityMatrix& probs, Strategy strategy, double k_target,
                               std::span<const LabelId> current_preds, std::span<const double> weights) {
  check_inputs(probs, strategy, current_preds, weights);
  const auto num_classes = static_cast<double>(probs.cols());
  if (!(k_target >= 1.0 && k_target <= num_classes))
    throw config_error("k_target must lie in [1, K]");
  if (probs.rows() == 0) return {0.0, 0.0};

  if (strategy == Strategy::top_k) {
    const double k = std::clamp(std::floor(k_target + 0.5), 1.0, num_classes);
    return {k, weighted_mean_size(probs, strategy, k, current_preds, weights)};
  }

  SizeFunction size(probs, strategy, current_preds, weights);
  const bool decreasing = strategy != Strategy::top_p;
  // Orient so that `small_end` yields the smallest sets.
  const double small_end = decreasing ? 1.0 : 0.0;
  const double large_end = decreasing ? 0.0 : 1.0;
  const double large_size = size(large_end);
  if (large_size <= k_target + kSizeSlack) return {large_end, large_size};
  const double small_size = size(small_end);
  if (small_size >= k_target) return {small_end, small_size};

  // Invariant: size(big) > k_target >= size(small).
  double big = large_end;
  double small = small_end;
  while (std::abs(small - big) > kThresholdResolution) {
    const double mid = 0.5 * (big + small);
    if (size(mid) > k_target)
      big = mid;
    else
      small = mid;
  }

  // Sizes are piecewise constant between boundaries; probing each boundary
  // and its neighbours inside the bracket finds the exact optimum.
  std::vector<double> candidates = {small, big};
  for (double c : size.boundaries(std::min(big, small), std::max(big, small))) {
    candidates.push_back(c);
    candidates.push_back(std::nextafter(c, 0.0));
    candidates.push_back(std::nextafter(c, 1.0));
  }
  ThresholdResult best{small, size(small)};
  double best_gap = std::abs(best.achieved - k_target);
  for (double p : candidates) {
    if (p < 0.0 || p > 1.0) continue;
    const double s = size(p);
    const double gap = std::abs(s - k_target);
    const bool smaller_sets = decreasing ? p > best.param : p < best.param;
    if (gap < best_gap || (gap == best_gap && smaller_sets)) {
      best = {p, s};
      best_gap = gap;
    }
  }
  // Equal mean size means identical sets, so move to the far end of the
  // constant piece: the largest p for Min-p, the smallest for Top-p.
  best.param = decreasing ? size.piece_end(best.param) : best.param;
  return best;
}

double find_optimal_threshold(const ProbabilityMatrix& probs, std::span<const LabelId> current_preds,
                              double k_target, std::span<const double> weights) {
  return find_threshold(probs, Strategy::min_p_plus_weighted, k_target, current_preds, weights).param;
}

std::vector<CandidateSet> filter_label_space(const ProbabilityMatrix& probs, Strategy strategy, double param,
                                             std::span<const LabelId> current_preds) {
  check_inputs(probs, strategy, current_preds, {});
  std::vector<CandidateSet> sets;
  sets.reserve(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto set = select(probs.row(i), strategy, param, uses_prediction(strategy) ? current_preds[i] : LabelId{0});
    set.sample = i;
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<CandidateSet> rank_label_space(const ProbabilityMatrix& probs) {
  std::vector<CandidateSet> sets;
  sets.reserve(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) sets.push_back({i, rank(probs.row(i)), 0.0});
  return sets;
}

}  // namespace lsr
