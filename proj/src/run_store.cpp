#include <fstream>
#include <sstream>

#include "lsr/engine.hpp"
#include "lsr/error.hpp"

namespace lsr {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Write to a sibling temp file, then rename, so readers never see a partial file.
void write_atomic(const fs::path& path, std::string_view bytes) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw io_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw io_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ordered_json> read_records(const fs::path& path) {
  std::istringstream in(read_all(path));
  std::vector<ordered_json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) throw data_error(path.string() + ":" + std::to_string(line_no) + ": malformed record");
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace

RunStore::RunStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw io_error("cannot create run directory " + dir_.string() + ": " + ec.message());
}

fs::path RunStore::iteration_dir(int t) const { return dir_ / ("iter_" + std::to_string(t)); }

bool RunStore::iteration_complete(int t) const { return fs::exists(iteration_dir(t) / "classifier.blob"); }

void RunStore::write_config(const ordered_json& snapshot) const {
  write_atomic(dir_ / "run.config", snapshot.dump(2) + "\n");
}

std::optional<ordered_json> RunStore::read_config() const {
  const auto path = dir_ / "run.config";
  if (!fs::exists(path)) return std::nullopt;
  auto j = ordered_json::parse(read_all(path), nullptr, false);
  if (j.is_discarded()) throw data_error(path.string() + " is not valid JSON");
  return j;
}

void RunStore::write_iteration(const IterationRecord& record, const Dataset& dataset,
                               std::span<const std::uint8_t> classifier_blob) const {
  const auto dir = iteration_dir(record.t);
  const auto& labels = dataset.label_space;
  std::string lines;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ordered_json j;
    j["id"] = dataset.records[i].id;
    j["label"] = labels.name(record.predictions.preds[i]);
    j["label_id"] = record.predictions.preds[i];
    j["raw_label"] = i < record.raw_labels.size() ? record.raw_labels[i] : "";
    j["rationale"] = i < record.predictions.rationales.size() ? record.predictions.rationales[i] : "";
    if (record.candidate_sets) {
      ordered_json names = ordered_json::array();
      for (auto id : (*record.candidate_sets)[i].labels) names.push_back(labels.name(id));
      j["candidates"] = std::move(names);
    } else {
      j["candidates"] = nullptr;
    }
    j["fallback"] = i < record.fallback.size() && record.fallback[i];
    lines += j.dump() + "\n";
  }
  write_atomic(dir / "predictions.records", lines);

  ordered_json summary;
  summary["t"] = record.t;
  summary["threshold"] = record.threshold ? ordered_json(*record.threshold) : ordered_json(nullptr);
  if (record.candidate_sets) {
    double total = 0.0;
    for (const auto& s : *record.candidate_sets) total += static_cast<double>(s.size());
    summary["mean_candidate_size"] = record.candidate_sets->empty() ? 0.0 : total / record.candidate_sets->size();
  } else {
    summary["mean_candidate_size"] = nullptr;
  }
  write_atomic(dir / "summary.json", summary.dump(2) + "\n");

  // Written last: its presence marks the iteration as complete.
  write_atomic(dir / "classifier.blob",
               std::string_view(reinterpret_cast<const char*>(classifier_blob.data()), classifier_blob.size()));
}

IterationRecord RunStore::read_iteration(int t, const Dataset& dataset) const {
  const auto dir = iteration_dir(t);
  const auto rows = read_records(dir / "predictions.records");
  if (rows.size() != dataset.size())
    throw data_error(dir.string() + " holds " + std::to_string(rows.size()) + " predictions for " +
                     std::to_string(dataset.size()) + " records");
  const auto& labels = dataset.label_space;
  IterationRecord rec;
  rec.t = t;
  rec.classifier_ref = "iter_" + std::to_string(t) + "/classifier.blob";
  bool with_candidates = false;
  std::vector<CandidateSet> sets;
  const auto summary = ordered_json::parse(read_all(dir / "summary.json"), nullptr, false);
  if (summary.is_discarded()) throw data_error(dir.string() + "/summary.json is not valid JSON");
  if (summary.contains("threshold") && !summary["threshold"].is_null())
    rec.threshold = summary["threshold"].get<double>();

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& j = rows[i];
    try {
      if (j.at("id").get<std::string>() != dataset.records[i].id)
        throw data_error(dir.string() + ": record " + std::to_string(i) + " is '" + j.at("id").get<std::string>() +
                         "', expected '" + dataset.records[i].id + "'");
      const auto id = j.at("label_id").get<LabelId>();
      if (!labels.contains(id) || labels.name(id) != j.at("label").get<std::string>())
        throw data_error(dir.string() + ": label of record '" + dataset.records[i].id + "' does not match the label space");
      rec.predictions.preds.push_back(id);
      rec.predictions.rationales.push_back(j.value("rationale", ""));
      rec.raw_labels.push_back(j.value("raw_label", ""));
      rec.fallback.push_back(j.value("fallback", false));
      if (!j.at("candidates").is_null()) {
        with_candidates = true;
        CandidateSet s;
        s.sample = i;
        s.threshold = rec.threshold.value_or(0.0);
        for (const auto& name : j.at("candidates")) {
          const auto cid = labels.find(name.get<std::string>());
          if (!cid) throw data_error(dir.string() + ": unknown candidate '" + name.get<std::string>() + "'");
          s.labels.push_back(*cid);
        }
        sets.push_back(std::move(s));
      }
    } catch (const nlohmann::json::exception& e) {
      throw data_error(dir.string() + ": malformed prediction record " + std::to_string(i) + ": " + e.what());
    }
  }
  if (with_candidates) {
    if (sets.size() != rows.size()) throw data_error(dir.string() + ": candidate sets are missing for some records");
    rec.candidate_sets = std::move(sets);
  }
  return rec;
}

std::vector<std::uint8_t> RunStore::read_classifier_blob(int t) const {
  const auto bytes = read_all(iteration_dir(t) / "classifier.blob");
  return {bytes.begin(), bytes.end()};
}

void RunStore::write_metrics(std::span<const IterationRow> rows) const {
  std::string lines;
  for (const auto& r : rows) {
    ordered_json j;
    j["t"] = r.t;
    j["macro_f1"] = r.macro_f1;
    j["vote_macro_f1"] = r.vote_macro_f1;
    j["mean_candidate_size"] = r.mean_candidate_size ? ordered_json(*r.mean_candidate_size) : ordered_json(nullptr);
    j["candidate_hit_rate"] = r.candidate_hit_rate ? ordered_json(*r.candidate_hit_rate) : ordered_json(nullptr);
    lines += j.dump() + "\n";
  }
  write_atomic(dir_ / "metrics.records", lines);
}

void RunStore::write_final(const PredictionVector& final_predictions, const Dataset& dataset) const {
  std::string lines;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ordered_json j;
    j["id"] = dataset.records[i].id;
    j["label"] = dataset.label_space.name(final_predictions.preds[i]);
    j["label_id"] = final_predictions.preds[i];
    lines += j.dump() + "\n";
  }
  write_atomic(dir_ / "final.records", lines);
}

void RunStore::append_events(std::span<const std::string> lines) const {
  if (lines.empty()) return;
  std::ofstream out(dir_ / "events.log", std::ios::app);
  if (!out) throw io_error("cannot append to " + (dir_ / "events.log").string());
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace lsr
