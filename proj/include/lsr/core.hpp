#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lsr {

using LabelId = std::uint32_t;

// Lowercase, trim, collapse internal whitespace runs to one space.
std::string normalize_label(std::string_view s);

/// Ordered closed-world label space. A label's id is its position.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(LabelId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  bool contains(LabelId id) const noexcept { return id < names_.size(); }

  // Exact lookup first, then normalized lookup.
  std::optional<LabelId> find(std::string_view name) const;
  std::optional<LabelId> find_normalized(std::string_view name) const;

  // Stable 64-bit digest of the ordered names; stored in classifier blobs.
  std::uint64_t hash() const;

  bool operator==(const LabelSpace& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, LabelId> exact_;
  std::unordered_map<std::string, LabelId> normalized_;
};

struct SampleRecord {
  std::string id;
  std::vector<std::pair<std::string, std::string>> semantic;
  std::vector<double> features;
  std::optional<LabelId> truth;
};

struct Dataset {
  std::vector<SampleRecord> records;
  LabelSpace label_space;
  std::size_t dim = 0;

  std::size_t size() const noexcept { return records.size(); }
  bool has_truth() const;
  // Throws data_error when any record lacks truth.
  std::vector<LabelId> truth() const;
};

struct Violation {
  std::string record_id;
  std::string rule;
  std::string message;
};

std::vector<Violation> validate_dataset(const Dataset& dataset);

struct PredictionVector {
  std::vector<LabelId> preds;
  std::vector<std::string> rationales;  // empty or one per prediction

  std::size_t size() const noexcept { return preds.size(); }
  // Throws data_error on out-of-range ids or mismatched rationale count.
  void check(std::size_t num_classes) const;
};

/// Dense row-major n x d matrix of features.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static FeatureMatrix from_dataset(const Dataset& dataset);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline constexpr double kRowSumTolerance = 1e-6;

/// n x K row-stochastic matrix. Construction validates every row.
class ProbabilityMatrix {
 public:
  ProbabilityMatrix() = default;
  ProbabilityMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  const std::vector<double>& data() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Ranked labels shown to the LLM for one sample.
struct CandidateSet {
  std::size_t sample = 0;
  std::vector<LabelId> labels;  // descending probability, ties by lower id
  double threshold = 0.0;

  std::size_t size() const noexcept { return labels.size(); }
  bool contains(LabelId id) const;
};

struct IterationRecord {
  int t = 0;
  PredictionVector predictions;
  std::optional<double> threshold;
  std::optional<std::vector<CandidateSet>> candidate_sets;
  std::string classifier_ref;  // path of the serialized classifier trained on `predictions`
  std::vector<bool> fallback;  // per sample: prediction came from the unresolved-label fallback
  std::vector<std::string> raw_labels;
};

}  // namespace lsr
