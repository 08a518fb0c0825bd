#include "lsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "lsr/engine.hpp"
#include "lsr/error.hpp"

namespace lsr {

MetricsReport macro_f1(std::span<const LabelId> preds, std::span<const LabelId> truth, std::size_t num_classes) {
  if (preds.size() != truth.size())
    throw data_error("prediction count " + std::to_string(preds.size()) + " does not match truth count " +
                     std::to_string(truth.size()));
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  MetricsReport report;
  report.support.assign(num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto y = truth[i];
    const auto p = preds[i];
    if (y >= num_classes) throw data_error("truth id " + std::to_string(y) + " is out of range");
    if (p >= num_classes) throw data_error("predicted id " + std::to_string(p) + " is out of range");
    ++report.support[y];
    if (p == y) {
      ++tp[y];
    } else {
      ++fp[p];
      ++fn[y];
    }
  }
  auto ratio = [](std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; };
  report.per_class.resize(num_classes);
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& s = report.per_class[c];
    s.precision = ratio(tp[c], tp[c] + fp[c]);
    s.recall = ratio(tp[c], tp[c] + fn[c]);
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    sum += s.f1;
  }
  report.macro_f1 = num_classes == 0 ? 0.0 : sum / static_cast<double>(num_classes);
  return report;
}

double hit_at_k(std::span<const std::vector<LabelId>> rankings, std::span<const LabelId> truth, std::size_t k) {
  if (rankings.size() != truth.size()) throw data_error("ranking count does not match truth count");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& r = rankings[i];
    const auto end = r.begin() + static_cast<std::ptrdiff_t>(std::min(k, r.size()));
    if (std::find(r.begin(), end, truth[i]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double candidate_hit_rate(std::span<const CandidateSet> sets, std::span<const LabelId> truth) {
  if (sets.size() != truth.size()) throw data_error("candidate set count does not match truth count");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += sets[i].contains(truth[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<std::vector<LabelId>> embedding_rank(const FeatureMatrix& sample_embeddings,
                                                 const FeatureMatrix& label_embeddings) {
  if (sample_embeddings.cols() != label_embeddings.cols())
    throw data_error("sample embeddings have width " + std::to_string(sample_embeddings.cols()) +
                     " but label embeddings have width " + std::to_string(label_embeddings.cols()));
  auto norm = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  const std::size_t k = label_embeddings.rows();
  std::vector<double> label_norms(k);
  for (std::size_t j = 0; j < k; ++j) {
    label_norms[j] = norm(label_embeddings.row(j));
    if (label_norms[j] == 0.0) throw data_error("label embedding " + std::to_string(j) + " is the zero vector");
  }
  std::vector<std::vector<LabelId>> out(sample_embeddings.rows());
  std::vector<double> cos(k);
  for (std::size_t i = 0; i < sample_embeddings.rows(); ++i) {
    const auto x = sample_embeddings.row(i);
    const double xn = norm(x);
    if (xn == 0.0) throw data_error("sample embedding " + std::to_string(i) + " is the zero vector");
    for (std::size_t j = 0; j < k; ++j) {
      const auto l = label_embeddings.row(j);
      cos[j] = std::inner_product(x.begin(), x.end(), l.begin(), 0.0) / (xn * label_norms[j]);
    }
    auto& r = out[i];
    r.resize(k);
    std::iota(r.begin(), r.end(), LabelId{0});
    std::stable_sort(r.begin(), r.end(), [&](LabelId a, LabelId b) { return cos[a] > cos[b]; });
  }
  return out;
}

std::vector<IterationRow> iteration_report(std::span<const IterationRecord> history, std::span<const LabelId> truth,
                                           std::size_t num_classes) {
  std::vector<IterationRow> rows;
  std::vector<std::vector<LabelId>> prefix;
  for (const auto& rec : history) {
    IterationRow row;
    row.t = rec.t;
    row.macro_f1 = macro_f1(rec.predictions.preds, truth, num_classes).macro_f1;
    prefix.push_back(rec.predictions.preds);
    row.vote_macro_f1 = macro_f1(majority_vote(prefix), truth, num_classes).macro_f1;
    if (rec.candidate_sets) {
      const auto& sets = *rec.candidate_sets;
      double total = 0.0;
      for (const auto& s : sets) total += static_cast<double>(s.size());
      row.mean_candidate_size = sets.empty() ? 0.0 : total / static_cast<double>(sets.size());
      row.candidate_hit_rate = candidate_hit_rate(sets, truth);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      if (c) os << "  ";
      os << std::setw(static_cast<int>(width[c])) << (c < cells.size() ? cells[c] : "");
    }
    os << '\n';
  };
  line(header);
  std::vector<std::string> rule;
  for (auto w : width) rule.emplace_back(w, '-');
  line(rule);
  for (const auto& r : rows) line(r);
  return os.str();
}

std::string format_iteration_report(std::span<const IterationRow> rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows)
    cells.push_back({std::to_string(r.t), fixed(r.macro_f1), fixed(r.vote_macro_f1),
                     r.mean_candidate_size ? fixed(*r.mean_candidate_size, 3) : "-",
                     r.candidate_hit_rate ? fixed(*r.candidate_hit_rate) : "-"});
  return format_table({"t", "macro_f1", "vote_macro_f1", "mean_size", "cand_hit_rate"}, cells);
}

}  // namespace lsr
