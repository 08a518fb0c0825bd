#include "lsr/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "lsr/error.hpp"
#include "lsr/random.hpp"

namespace lsr {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Cell {
  std::string text;
  std::optional<std::vector<double>> vec;
};

using Row = std::vector<std::pair<std::string, Cell>>;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_real(std::string_view s) {
  const auto t = trim(s);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

std::vector<double> parse_vector(const ordered_json& j, const std::string& where) {
  if (!j.is_array()) throw data_error(where + ": feature vector must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw data_error(where + ": feature vector must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::string scalar_text(const ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

std::vector<Row> rows_from_jsonl(const std::string& text, const std::optional<std::string>& feature_column) {
  std::vector<Row> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw data_error(where + ": not a JSON object");
    Row row;
    for (auto it = j.begin(); it != j.end(); ++it) {
      Cell cell;
      if (feature_column && it.key() == *feature_column) {
        cell.vec = parse_vector(it.value(), where);
      } else if (it.value().is_array() || it.value().is_object()) {
        continue;  // auxiliary vectors (e.g. embeddings) are read on demand
      } else {
        cell.text = scalar_text(it.value());
      }
      row.emplace_back(it.key(), std::move(cell));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<Row> rows_from_table(const RawTable& table, const std::optional<std::string>& feature_column) {
  std::vector<Row> rows;
  rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    if (cells.size() != table.columns.size())
      throw data_error("ragged row " + std::to_string(r + 1) + ": expected " +
                       std::to_string(table.columns.size()) + " cells, got " + std::to_string(cells.size()));
    Row row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      Cell cell;
      if (feature_column && table.columns[c] == *feature_column) {
        const auto t = trim(cells[c]);
        ordered_json j = ordered_json::parse(t, nullptr, false);
        if (j.is_discarded()) {
          // also accept space- or semicolon-separated numbers
          std::vector<double> v;
          std::string tok;
          std::istringstream ts(t);
          while (ts >> tok) {
            std::istringstream parts(tok);
            std::string part;
            while (std::getline(parts, part, ';')) {
              if (part.empty()) continue;
              auto x = parse_real(part);
              if (!x) throw data_error("row " + std::to_string(r + 1) + ": bad feature value '" + part + "'");
              v.push_back(*x);
            }
          }
          cell.vec = std::move(v);
        } else {
          cell.vec = parse_vector(j, "row " + std::to_string(r + 1));
        }
      } else {
        cell.text = cells[c];
      }
      row.emplace_back(table.columns[c], std::move(cell));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Dataset build_dataset(const std::vector<Row>& rows, const IngestSpec& spec, const LabelSpace& label_space) {
  if (rows.empty()) throw data_error("dataset has no records");
  const Row& schema = rows.front();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    bool same = rows[r].size() == schema.size();
    for (std::size_t c = 0; same && c < schema.size(); ++c) same = rows[r][c].first == schema[c].first;
    if (!same) throw data_error("ragged row " + std::to_string(r + 1) + ": columns differ from the first row");
  }
  for (const auto& [name, _] : spec.columns) {
    if (std::none_of(schema.begin(), schema.end(), [&](const auto& c) { return c.first == name; }))
      throw data_error("ingest spec names unknown column '" + name + "'");
  }

  auto directive_of = [&](const std::string& name) {
    auto it = spec.columns.find(name);
    return it == spec.columns.end() ? ColumnSpec{} : it->second;
  };

  // Column-wise categorical coding in first-occurrence order.
  std::unordered_map<std::size_t, std::vector<std::int64_t>> codes;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (directive_of(schema[c].first).directive != ColumnDirective::categorical_numeric) continue;
    std::vector<std::string> values;
    values.reserve(rows.size());
    for (const auto& row : rows) values.push_back(row[c].second.text);
    codes[c] = encode_categorical(values);
  }

  Dataset ds;
  ds.label_space = label_space;
  ds.records.reserve(rows.size());
  bool has_id = std::any_of(schema.begin(), schema.end(), [&](const auto& c) { return c.first == spec.id_column; });
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    SampleRecord rec;
    rec.id = std::to_string(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto& [name, cell] = row[c];
      if (has_id && name == spec.id_column) {
        rec.id = cell.text;
        continue;
      }
      if (spec.label_column && name == *spec.label_column) {
        const auto value = trim(cell.text);
        if (value.empty()) continue;
        auto id = label_space.find(value);
        if (!id) throw data_error("record '" + rec.id + "': label '" + value + "' is not in the label space");
        rec.truth = *id;
        continue;
      }
      if (cell.vec) {
        for (double v : *cell.vec) rec.features.push_back(spec.binarize_features ? (v > 0.0 ? 1.0 : 0.0) : v);
        continue;
      }
      const auto cs = directive_of(name);
      const std::string shown = cs.rename.value_or(name);
      switch (cs.directive) {
        case ColumnDirective::drop:
          break;
        case ColumnDirective::semantic_only:
          rec.semantic.emplace_back(shown, cell.text);
          break;
        case ColumnDirective::categorical_numeric:
          rec.semantic.emplace_back(shown, cell.text);
          rec.features.push_back(static_cast<double>(codes.at(c)[r]));
          break;
        case ColumnDirective::passthrough_numeric: {
          auto v = parse_real(cell.text);
          if (!v) throw data_error("record '" + rec.id + "': column '" + name + "' is not numeric: '" + cell.text + "'");
          rec.semantic.emplace_back(shown, cell.text);
          rec.features.push_back(*v);
          break;
        }
        case ColumnDirective::hour_numeric: {
          const int h = extract_hour(cell.text);
          rec.semantic.emplace_back(shown, std::to_string(h));
          rec.features.push_back(h);
          break;
        }
      }
    }
    ds.records.push_back(std::move(rec));
  }
  ds.dim = ds.records.front().features.size();
  if (ds.dim == 0) throw data_error("missing feature source: no numeric columns and no feature vector");
  for (const auto& v : validate_dataset(ds))
    throw data_error("record '" + v.record_id + "' violates " + v.rule + ": " + v.message);
  return ds;
}

ColumnDirective parse_directive(const std::string& s) {
  if (s == "semantic_only") return ColumnDirective::semantic_only;
  if (s == "categorical_numeric") return ColumnDirective::categorical_numeric;
  if (s == "passthrough_numeric") return ColumnDirective::passthrough_numeric;
  if (s == "hour_numeric") return ColumnDirective::hour_numeric;
  if (s == "drop") return ColumnDirective::drop;
  throw config_error("unknown column directive '" + s + "'");
}

const char* directive_name(ColumnDirective d) {
  switch (d) {
    case ColumnDirective::semantic_only: return "semantic_only";
    case ColumnDirective::categorical_numeric: return "categorical_numeric";
    case ColumnDirective::passthrough_numeric: return "passthrough_numeric";
    case ColumnDirective::hour_numeric: return "hour_numeric";
    case ColumnDirective::drop: return "drop";
  }
  return "?";
}

}  // namespace

IngestSpec IngestSpec::from_json(const ordered_json& j) {
  IngestSpec s;
  if (j.is_null()) return s;
  if (!j.is_object()) throw config_error("ingest section must be an object");
  if (j.contains("id_column")) s.id_column = j.at("id_column").get<std::string>();
  auto optional_name = [&](const char* key, std::optional<std::string>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null())
      out.reset();
    else
      out = j.at(key).get<std::string>();
  };
  optional_name("feature_column", s.feature_column);
  optional_name("label_column", s.label_column);
  if (j.contains("binarize_features")) s.binarize_features = j.at("binarize_features").get<bool>();
  if (j.contains("columns")) {
    for (auto it = j.at("columns").begin(); it != j.at("columns").end(); ++it) {
      ColumnSpec cs;
      if (it.value().is_string()) {
        cs.directive = parse_directive(it.value().get<std::string>());
      } else {
        cs.directive = parse_directive(it.value().at("directive").get<std::string>());
        if (it.value().contains("rename")) cs.rename = it.value().at("rename").get<std::string>();
      }
      s.columns[it.key()] = cs;
    }
  }
  return s;
}

ordered_json IngestSpec::to_json() const {
  ordered_json j;
  j["id_column"] = id_column;
  j["feature_column"] = feature_column ? ordered_json(*feature_column) : ordered_json(nullptr);
  j["label_column"] = label_column ? ordered_json(*label_column) : ordered_json(nullptr);
  j["binarize_features"] = binarize_features;
  ordered_json cols = ordered_json::object();
  for (const auto& [name, cs] : columns) {
    ordered_json c = {{"directive", directive_name(cs.directive)}};
    if (cs.rename) c["rename"] = *cs.rename;
    cols[name] = c;
  }
  j["columns"] = cols;
  return j;
}

LabelSpace load_label_space(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (!t.empty()) names.push_back(std::move(t));
  }
  return LabelSpace(std::move(names));
}

RawTable parse_csv(std::string_view text) {
  RawTable table;
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> row;
  std::string cell;
  bool in_quotes = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(cell));
        cell.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !cell.empty()) {
          row.push_back(std::move(cell));
          lines.push_back(std::move(row));
        }
        row.clear();
        cell.clear();
        row_has_content = false;
        break;
      default:
        cell.push_back(ch);
        row_has_content = true;
    }
  }
  if (in_quotes) throw data_error("unterminated quoted field in table");
  if (row_has_content || !cell.empty()) {
    row.push_back(std::move(cell));
    lines.push_back(std::move(row));
  }
  if (lines.empty()) throw data_error("table has no header row");
  table.columns = std::move(lines.front());
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    for (std::size_t o = 0; o < c; ++o)
      if (table.columns[c] == table.columns[o]) throw data_error("duplicate column name '" + table.columns[c] + "'");
  table.rows.assign(std::make_move_iterator(lines.begin() + 1), std::make_move_iterator(lines.end()));
  return table;
}

RawTable read_csv(const fs::path& path) { return parse_csv(read_file(path)); }

Dataset dataset_from_table(const RawTable& table, const IngestSpec& spec, const LabelSpace& label_space) {
  IngestSpec s = spec;
  if (table.id_column) s.id_column = *table.id_column;
  return build_dataset(rows_from_table(table, s.feature_column), s, label_space);
}

Dataset load_dataset(const fs::path& path, const IngestSpec& spec, const LabelSpace& label_space) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return dataset_from_table(read_csv(path), spec, label_space);
  return build_dataset(rows_from_jsonl(read_file(path), spec.feature_column), spec, label_space);
}

std::vector<std::int64_t> encode_categorical(const std::vector<std::string>& values) {
  std::unordered_map<std::string, std::int64_t> seen;
  std::vector<std::int64_t> out;
  out.reserve(values.size());
  for (const auto& v : values) {
    auto [it, inserted] = seen.emplace(v, static_cast<std::int64_t>(seen.size()));
    out.push_back(it->second);
  }
  return out;
}

FeatureMatrix binarize_embeddings(const FeatureMatrix& matrix) {
  FeatureMatrix out(matrix.rows(), matrix.cols());
  for (std::size_t i = 0; i < matrix.data().size(); ++i) out.data()[i] = matrix.data()[i] > 0.0 ? 1.0 : 0.0;
  return out;
}

int extract_hour(std::string_view value) {
  auto t = trim(value);
  if (const auto space = t.rfind(' '); space != std::string::npos) t = t.substr(space + 1);
  if (const auto tee = t.find('T'); tee != std::string::npos) t = t.substr(tee + 1);
  const auto colon = t.find(':');
  const std::string head = colon == std::string::npos ? t : t.substr(0, colon);
  int h = -1;
  auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), h);
  if (ec != std::errc{} || ptr != head.data() + head.size() || h < 0 || h > 23)
    throw data_error("cannot extract hour of day from '" + std::string(value) + "'");
  return h;
}

std::string render_semantic(const SampleRecord& record) {
  std::string out;
  for (std::size_t i = 0; i < record.semantic.size(); ++i) {
    if (i) out += ", ";
    out += record.semantic[i].first;
    out += ": ";
    out += record.semantic[i].second;
  }
  return out;
}

Dataset stratified_subsample(const Dataset& dataset, double fraction, std::uint64_t seed,
                             const std::vector<LabelId>* strata) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw config_error("subsample fraction must lie in (0,1]");
  const std::vector<LabelId> labels = strata ? *strata : dataset.truth();
  if (labels.size() != dataset.size()) throw data_error("strata length does not match dataset size");

  std::map<LabelId, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);

  std::vector<std::size_t> keep;
  for (auto& [label, members] : groups) {
    const auto m = members.size();
    auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(m) + 0.5));
    count = std::clamp<std::size_t>(count, 1, m);
    Rng rng(derive_seed(seed, "subsample", label));
    rng.shuffle(members);
    keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(count));
  }
  std::sort(keep.begin(), keep.end());

  Dataset out;
  out.label_space = dataset.label_space;
  out.dim = dataset.dim;
  out.records.reserve(keep.size());
  for (auto i : keep) out.records.push_back(dataset.records[i]);
  return out;
}

}  // namespace lsr
