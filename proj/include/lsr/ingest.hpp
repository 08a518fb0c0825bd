#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lsr/core.hpp"

namespace lsr {

struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::optional<std::string> id_column;
};

enum class ColumnDirective {
  semantic_only,        // prompt text only
  categorical_numeric,  // prompt text + first-occurrence integer code
  passthrough_numeric,  // prompt text + parsed real value
  hour_numeric,         // prompt text "HH" + hour parsed from a time of day
  drop,
};

struct ColumnSpec {
  ColumnDirective directive = ColumnDirective::semantic_only;
  std::optional<std::string> rename;  // name shown in the prompt
};

struct IngestSpec {
  std::map<std::string, ColumnSpec> columns;  // unlisted columns default to semantic_only
  std::string id_column = "id";
  std::optional<std::string> feature_column = "features";
  std::optional<std::string> label_column = "label";
  bool binarize_features = false;

  static IngestSpec from_json(const nlohmann::ordered_json& j);
  nlohmann::ordered_json to_json() const;
};

LabelSpace load_label_space(const std::filesystem::path& path);

// Line-delimited JSON records (.jsonl/.ndjson/.records) or a header CSV table.
Dataset load_dataset(const std::filesystem::path& path, const IngestSpec& spec,
                     const LabelSpace& label_space);

RawTable parse_csv(std::string_view text);
RawTable read_csv(const std::filesystem::path& path);
Dataset dataset_from_table(const RawTable& table, const IngestSpec& spec, const LabelSpace& label_space);

std::vector<std::int64_t> encode_categorical(const std::vector<std::string>& values);

// 1 where the source value is strictly positive, else 0.
FeatureMatrix binarize_embeddings(const FeatureMatrix& matrix);

// "19:05", "19:05:00" or "2003-01-06 19:05" -> 19.
int extract_hour(std::string_view value);

std::string render_semantic(const SampleRecord& record);

// Per-class counts round(fraction * m_c) half-up, at least 1 per non-empty
// class. Strata come from `strata` when given, else from ground truth.
Dataset stratified_subsample(const Dataset& dataset, double fraction, std::uint64_t seed,
                             const std::vector<LabelId>* strata = nullptr);

}  // namespace lsr
