#include "lsr/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "lsr/error.hpp"
#include "lsr/random.hpp"

namespace lsr {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::llm: return "llm";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

std::string normalize_label(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) throw data_error("label space needs at least 2 labels, got " +
                                          std::to_string(names_.size()));
  for (LabelId id = 0; id < names_.size(); ++id) {
    const auto& n = names_[id];
    const auto norm = normalize_label(n);
    if (norm.empty()) throw data_error("label " + std::to_string(id) + " is empty");
    if (!normalized_.emplace(norm, id).second)
      throw data_error("duplicate label after normalization: '" + n + "'");
    exact_.emplace(n, id);
  }
}

std::optional<LabelId> LabelSpace::find(std::string_view name) const {
  if (auto it = exact_.find(std::string(name)); it != exact_.end()) return it->second;
  return find_normalized(name);
}

std::optional<LabelId> LabelSpace::find_normalized(std::string_view name) const {
  if (auto it = normalized_.find(normalize_label(name)); it != normalized_.end()) return it->second;
  return std::nullopt;
}

std::uint64_t LabelSpace::hash() const {
  std::uint64_t h = hash_string("lsr-label-space");
  for (const auto& n : names_) h = splitmix64(h ^ hash_string(n));
  return h;
}

bool Dataset::has_truth() const {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(), [](const auto& r) { return r.truth.has_value(); });
}

std::vector<LabelId> Dataset::truth() const {
  std::vector<LabelId> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.truth) throw data_error("record '" + r.id + "' has no ground-truth label");
    out.push_back(*r.truth);
  }
  return out;
}

std::vector<Violation> validate_dataset(const Dataset& dataset) {
  std::vector<Violation> report;
  if (dataset.records.empty()) report.push_back({"", "non-empty", "dataset has no records"});
  if (dataset.label_space.size() < 2)
    report.push_back({"", "label-space", "label space has fewer than 2 labels"});

  std::set<std::string> seen;
  const std::vector<std::pair<std::string, std::string>>* first_semantic = nullptr;
  for (const auto& r : dataset.records) {
    if (!seen.insert(r.id).second)
      report.push_back({r.id, "unique-id", "duplicate record id '" + r.id + "'"});
    if (r.features.size() != dataset.dim) {
      std::ostringstream msg;
      msg << "record has " << r.features.size() << " features, dataset dimension is " << dataset.dim;
      report.push_back({r.id, "dimensionality", msg.str()});
    }
    if (std::any_of(r.features.begin(), r.features.end(), [](double v) { return !std::isfinite(v); }))
      report.push_back({r.id, "finite-features", "record has non-finite feature values"});
    if (r.truth && !dataset.label_space.contains(*r.truth))
      report.push_back({r.id, "truth-range", "truth id " + std::to_string(*r.truth) + " out of range"});
    if (!first_semantic) {
      first_semantic = &r.semantic;
    } else {
      bool same = first_semantic->size() == r.semantic.size();
      for (std::size_t i = 0; same && i < r.semantic.size(); ++i)
        same = (*first_semantic)[i].first == r.semantic[i].first;
      if (!same)
        report.push_back({r.id, "semantic-schema", "semantic feature names differ from the first record"});
    }
  }
  return report;
}

void PredictionVector::check(std::size_t num_classes) const {
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] >= num_classes)
      throw data_error("prediction " + std::to_string(i) + " has invalid label id " +
                       std::to_string(preds[i]));
  if (!rationales.empty() && rationales.size() != preds.size())
    throw data_error("rationale count does not match prediction count");
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw data_error("feature matrix data size mismatch");
}

FeatureMatrix FeatureMatrix::from_dataset(const Dataset& dataset) {
  FeatureMatrix m(dataset.size(), dataset.dim);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& f = dataset.records[i].features;
    if (f.size() != dataset.dim)
      throw data_error("record '" + dataset.records[i].id + "' has wrong feature width");
    std::copy(f.begin(), f.end(), m.row(i).begin());
  }
  return m;
}

ProbabilityMatrix::ProbabilityMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw data_error("probability matrix data size mismatch");
  for (std::size_t i = 0; i < rows_; ++i) {
    double sum = 0.0;
    for (double p : row(i)) {
      if (!(p >= 0.0 && p <= 1.0))
        throw data_error("probability row " + std::to_string(i) + " has entry outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      throw data_error("probability row " + std::to_string(i) + " sums to " + std::to_string(sum));
  }
}

bool CandidateSet::contains(LabelId id) const {
  return std::find(labels.begin(), labels.end(), id) != labels.end();
}

}  // namespace lsr
