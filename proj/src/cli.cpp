#include "lsr/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsr/classifier.hpp"
#include "lsr/config.hpp"
#include "lsr/engine.hpp"
#include "lsr/error.hpp"
#include "lsr/ingest.hpp"
#include "lsr/llm.hpp"
#include "lsr/metrics.hpp"
#include "lsr/selection.hpp"
#include "lsr/synthetic.hpp"

namespace lsr {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- config

struct ConfigSources {
  std::string file;
  std::vector<std::string> sets;
  std::optional<std::string> iterations;
  std::optional<std::string> k_target;
  std::optional<std::string> seed;
  std::optional<std::string> batch_size;
  std::optional<std::string> strategy;
  std::optional<std::string> llm_mode;
  std::optional<std::string> temperature;
  std::optional<std::string> accuracy_full;
  std::optional<std::string> accuracy_two;
  std::optional<std::string> max_in_flight;
};

void add_config_options(CLI::App* cmd, ConfigSources& s) {
  cmd->add_option("--config", s.file, "JSON config file");
  cmd->add_option("--set", s.sets, "Override a config key, e.g. --set classifier.l2=0.01");
  cmd->add_option("--iterations", s.iterations, "Refinement iterations after the zero-shot pass");
  cmd->add_option("--k-target", s.k_target, "Target mean candidate-set size, or 'full'");
  cmd->add_option("--seed", s.seed, "Root seed");
  cmd->add_option("--batch-size", s.batch_size, "Cases per LLM request");
  cmd->add_option("--strategy", s.strategy, "top_k | top_p | min_p | min_p_plus | min_p_plus_weighted");
  cmd->add_option("--llm-mode", s.llm_mode, "live | mock");
  cmd->add_option("--temperature", s.temperature, "LLM sampling temperature");
  cmd->add_option("--mock-accuracy-full", s.accuracy_full, "Mock accuracy over the full label space");
  cmd->add_option("--mock-accuracy-two", s.accuracy_two, "Mock accuracy with at most two candidates");
  cmd->add_option("--max-in-flight", s.max_in_flight, "Concurrent LLM requests");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw io_error("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw io_error("short write to " + path.string());
}

ordered_json parse_json_file(const fs::path& path) {
  auto j = ordered_json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) throw config_error(path.string() + " is not valid JSON");
  return j;
}

// defaults < base (file or stored run config) < --set < dedicated flags.
ordered_json effective_config_json(const ConfigSources& s, ordered_json base = ordered_json::object()) {
  ordered_json j = s.file.empty() ? std::move(base) : parse_json_file(s.file);
  if (!j.is_object()) throw config_error("config must be a JSON object");
  for (const auto& a : s.sets) apply_override(j, a);
  auto flag = [&](const std::optional<std::string>& v, const std::string& key) {
    if (v) apply_override(j, key + "=" + *v);
  };
  flag(s.iterations, "iterations");
  flag(s.k_target, "k_target");
  flag(s.seed, "seed");
  flag(s.batch_size, "batch_size");
  if (s.strategy) j["strategy"] = *s.strategy;
  if (s.llm_mode) apply_override(j, "llm.mode=\"" + *s.llm_mode + "\"");
  flag(s.temperature, "llm.temperature");
  flag(s.accuracy_full, "llm.mock.accuracy_at_full");
  flag(s.accuracy_two, "llm.mock.accuracy_at_two");
  flag(s.max_in_flight, "llm.max_in_flight");
  return j;
}

// ---------------------------------------------------------------- inputs

struct InputPaths {
  std::string data;
  std::string labels;
  std::string ingest;
  std::optional<double> subsample;
};

void add_input_options(CLI::App* cmd, InputPaths& p, bool required) {
  auto* d = cmd->add_option("--data", p.data, "Records (.jsonl) or table (.csv)");
  auto* l = cmd->add_option("--labels", p.labels, "Label space, one label per line");
  if (required) {
    d->required();
    l->required();
  }
  cmd->add_option("--ingest", p.ingest, "JSON ingest spec (column directives)");
}

ordered_json inputs_json(const InputPaths& p) {
  ordered_json j;
  j["data"] = fs::absolute(p.data).lexically_normal().string();
  j["labels"] = fs::absolute(p.labels).lexically_normal().string();
  j["ingest"] = p.ingest.empty() ? IngestSpec{}.to_json() : IngestSpec::from_json(parse_json_file(p.ingest)).to_json();
  j["subsample"] = p.subsample ? ordered_json(*p.subsample) : ordered_json(nullptr);
  return j;
}

Dataset load_inputs(const ordered_json& inputs, std::uint64_t seed) {
  const auto labels = load_label_space(inputs.at("labels").get<std::string>());
  auto spec = IngestSpec::from_json(inputs.at("ingest"));
  auto data = load_dataset(inputs.at("data").get<std::string>(), spec, labels);
  if (inputs.contains("subsample") && !inputs.at("subsample").is_null())
    data = stratified_subsample(data, inputs.at("subsample").get<double>(), seed);
  return data;
}

struct RunDirectory {
  RunConfig config;
  ordered_json snapshot;
  Dataset dataset;
};

RunDirectory open_run(const fs::path& dir) {
  RunStore store(dir);
  const auto snapshot = store.read_config();
  if (!snapshot) throw data_error(dir.string() + " has no run.config");
  RunDirectory run;
  run.snapshot = *snapshot;
  run.config = run_config_from_json(snapshot->at("config"));
  run.dataset = load_inputs(snapshot->at("inputs"), run.config.seed);
  return run;
}

std::vector<IterationRecord> load_history(const RunStore& store, const RunDirectory& run) {
  std::vector<IterationRecord> history;
  for (int t = 0; t <= run.config.iterations; ++t) {
    if (!store.iteration_complete(t))
      throw data_error("run is incomplete: iter_" + std::to_string(t) + " is missing or unfinished");
    history.push_back(store.read_iteration(t, run.dataset));
  }
  return history;
}

int last_complete(const RunStore& store) {
  int t = -1;
  while (store.iteration_complete(t + 1)) ++t;
  if (t < 0) throw data_error(store.dir().string() + " holds no completed iteration");
  return t;
}

std::map<std::string, std::vector<double>> read_vector_field(const fs::path& path, const std::string& key_field,
                                                             const std::string& field) {
  std::istringstream in(read_text(path));
  std::map<std::string, std::vector<double>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = ordered_json::parse(line, nullptr, false);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (j.is_discarded() || !j.is_object()) throw data_error(where + ": malformed record");
    if (!j.contains(key_field)) throw data_error(where + ": missing '" + key_field + "'");
    if (!j.contains(field) || !j.at(field).is_array()) throw data_error(where + ": missing embedding field '" + field + "'");
    out[j.at(key_field).get<std::string>()] = j.at(field).get<std::vector<double>>();
  }
  return out;
}

std::string predictions_text(const Dataset& data, const PredictionVector& preds,
                             const std::vector<CandidateSet>* candidates) {
  std::string text;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ordered_json j;
    j["id"] = data.records[i].id;
    j["label"] = data.label_space.name(preds.preds[i]);
    j["label_id"] = preds.preds[i];
    if (candidates) {
      ordered_json names = ordered_json::array();
      for (auto id : (*candidates)[i].labels) names.push_back(data.label_space.name(id));
      j["candidates"] = std::move(names);
    }
    text += j.dump() + "\n";
  }
  return text;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || !(v >= 1.0)) throw std::invalid_argument(item);
      grid.push_back(v);
    } catch (const std::exception&) {
      throw config_error("k grid entries must be numbers >= 1, got '" + item + "'");
    }
  }
  if (grid.empty()) throw config_error("k grid is empty");
  return grid;
}

void print_scores(std::ostream& out, const MetricsReport& report, const LabelSpace& labels) {
  out << "macro_f1 " << fixed(report.macro_f1) << "\n";
  std::vector<std::vector<std::string>> rows;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const auto& s = report.per_class[c];
    rows.push_back({labels.name(static_cast<LabelId>(c)), fixed(s.precision), fixed(s.recall), fixed(s.f1),
                    std::to_string(report.support[c])});
  }
  out << format_table({"label", "precision", "recall", "f1", "support"}, rows);
}

// ---------------------------------------------------------------- commands

int cmd_run(const ConfigSources& sources, InputPaths inputs, const std::string& out_dir, std::ostream& out) {
  ordered_json base = ordered_json::object();
  const fs::path run_config_path = fs::path(out_dir) / "run.config";
  if (sources.file.empty() && fs::exists(run_config_path)) {
    // Resuming: the stored config is the base; flags still apply on top.
    base = parse_json_file(run_config_path).at("config");
  }
  const auto config = run_config_from_json(effective_config_json(sources, base));
  RunOptions options;
  options.run_dir = out_dir;
  options.inputs = inputs_json(inputs);
  const auto dataset = load_inputs(options.inputs, config.seed);

  std::mutex log_mutex;
  std::function<void(const std::string&)> log;
  if (config.llm.log_requests) {
    const auto log_path = fs::path(out_dir) / "requests.log";
    fs::create_directories(out_dir);
    log = [log_path, &log_mutex](const std::string& line) {
      std::lock_guard lock(log_mutex);
      std::ofstream(log_path, std::ios::app) << line << '\n';
    };
  }
  auto labeler = make_labeler(config.llm, log);
  const LogisticBackend backend(config.classifier);
  const auto history = run_lsr(dataset, config, *labeler, backend, options);

  out << "run complete: " << history.iterations.size() << " iteration(s), " << dataset.size() << " records -> "
      << out_dir << "\n";
  std::size_t fallbacks = 0;
  for (const auto& rec : history.iterations)
    for (bool f : rec.fallback) fallbacks += f ? 1 : 0;
  if (fallbacks) out << "fallback labels: " << fallbacks << " (see events.log)\n";
  if (!history.metrics.empty()) {
    out << format_iteration_report(history.metrics);
    out << "final (majority vote) macro_f1 "
        << fixed(macro_f1(history.final_predictions.preds, dataset.truth(), dataset.label_space.size()).macro_f1)
        << "\n";
  }
  return 0;
}

int cmd_distill(const ConfigSources& sources, const std::string& run_dir, const std::string& out_path,
                std::ostream& out) {
  const RunStore store(run_dir);
  auto run = open_run(run_dir);
  const auto history = load_history(store, run);
  const auto config = run_config_from_json(effective_config_json(sources, run.snapshot.at("config")));
  const auto clf = distill(run.dataset, history, config.classifier);
  const auto blob = clf.serialize();
  write_text(out_path, std::string(blob.begin(), blob.end()));
  write_text(out_path + ".config", to_json(config).dump(2) + "\n");

  const auto& info = clf.info();
  out << "distilled classifier -> " << out_path << "\n";
  out << format_table({"rows", "train_rows", "holdout_rows", "epochs", "step", "holdout_loss"},
                      {{std::to_string(run.dataset.size() * history.size()), std::to_string(info.train_rows),
                        std::to_string(info.holdout_rows), std::to_string(info.epochs), fixed(info.step_size, 6),
                        fixed(info.holdout_loss, 6)}});
  if (run.dataset.has_truth()) {
    const auto truth = run.dataset.truth();
    const std::size_t k = run.dataset.label_space.size();
    const auto probs = clf.predict_proba(FeatureMatrix::from_dataset(run.dataset));
    out << "train macro_f1 classifier " << fixed(macro_f1(argmax_rows(probs), truth, k).macro_f1) << " vote "
        << fixed(macro_f1(majority_vote(history).preds, truth, k).macro_f1) << "\n";
  }
  return 0;
}

int cmd_infer(const ConfigSources& sources, const InputPaths& inputs, const std::string& blob_path,
              const std::string& mode, const std::string& out_path, std::ostream& out) {
  if (mode != "plain" && mode != "with-llm") throw config_error("--mode must be plain or with-llm, got '" + mode + "'");
  const auto config = run_config_from_json(effective_config_json(sources));
  const auto bytes = read_text(blob_path);
  const auto clf = TrainedClassifier::deserialize(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
  const auto data = load_inputs(inputs_json(inputs), config.seed);
  if (clf.label_hash() != 0 && clf.label_hash() != data.label_space.hash())
    throw data_error("classifier was trained on a different label space");

  std::unique_ptr<Labeler> labeler;
  DirectInferOptions options;
  options.batch_size = config.batch_size;
  options.seed = config.seed;
  if (mode == "with-llm") {
    if (config.k_target.is_full()) throw config_error("with-llm inference needs a numeric k_target");
    labeler = make_labeler(config.llm);
    options.labeler = labeler.get();
    options.k_target = config.k_target.get();
  }
  const auto result = direct_infer(clf, data, options);
  write_text(out_path, predictions_text(data, result.predictions, options.labeler ? &result.candidates : nullptr));
  write_text(out_path + ".config", to_json(config).dump(2) + "\n");

  out << "predictions (" << mode << ") -> " << out_path << " (" << data.size() << " records)\n";
  if (options.labeler) {
    double total = 0.0;
    for (const auto& s : result.candidates) total += static_cast<double>(s.size());
    out << "threshold " << fixed(*result.threshold, 6) << " weighted_mean_size " << fixed(result.weighted_mean_size, 3)
        << " mean_size " << fixed(data.size() ? total / data.size() : 0.0, 3) << "\n";
    for (const auto& e : result.events) out << e << "\n";
  }
  if (data.has_truth())
    out << "macro_f1 " << fixed(macro_f1(result.predictions.preds, data.truth(), data.label_space.size()).macro_f1)
        << "\n";
  return 0;
}

struct ProbabilitySource {
  ProbabilityMatrix probs;
  std::vector<LabelId> preds;
  std::vector<LabelId> truth;
  std::size_t num_classes = 0;
};

ProbabilitySource probabilities_from_run(const std::string& run_dir, std::optional<int> iteration) {
  const RunStore store(run_dir);
  auto run = open_run(run_dir);
  const int t = iteration.value_or(0);
  if (!store.iteration_complete(t)) throw data_error("iter_" + std::to_string(t) + " is missing or unfinished");
  const auto rec = store.read_iteration(t, run.dataset);
  const auto clf = TrainedClassifier::deserialize(store.read_classifier_blob(t));
  ProbabilitySource src;
  src.probs = clf.predict_proba(FeatureMatrix::from_dataset(run.dataset));
  src.preds = rec.predictions.preds;
  src.truth = run.dataset.truth();
  src.num_classes = run.dataset.label_space.size();
  return src;
}

// Line-delimited {"probs": [...], "truth": id, "pred": id (optional, default argmax)}.
ProbabilitySource probabilities_from_file(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<double> data;
  ProbabilitySource src;
  std::vector<std::optional<LabelId>> preds;
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = ordered_json::parse(line, nullptr, false);
    const std::string where = path + ":" + std::to_string(rows + 1);
    if (j.is_discarded() || !j.contains("probs") || !j.contains("truth"))
      throw data_error(where + ": expected an object with \"probs\" and \"truth\"");
    const auto row = j.at("probs").get<std::vector<double>>();
    if (rows == 0) src.num_classes = row.size();
    if (row.size() != src.num_classes) throw data_error(where + ": row width differs from the first row");
    data.insert(data.end(), row.begin(), row.end());
    src.truth.push_back(j.at("truth").get<LabelId>());
    preds.push_back(j.contains("pred") ? std::optional<LabelId>(j.at("pred").get<LabelId>()) : std::nullopt);
    ++rows;
  }
  if (rows == 0) throw data_error(path + " holds no rows");
  src.probs = ProbabilityMatrix(rows, src.num_classes, std::move(data));
  const auto argmax = argmax_rows(src.probs);
  for (std::size_t i = 0; i < rows; ++i) src.preds.push_back(preds[i].value_or(argmax[i]));
  for (std::size_t i = 0; i < rows; ++i)
    if (src.truth[i] >= src.num_classes || src.preds[i] >= src.num_classes)
      throw data_error(path + ":" + std::to_string(i + 1) + ": label id out of range");
  return src;
}

int cmd_ablate(const std::string& run_dir, const std::string& probs_path, std::optional<int> iteration,
               const std::string& grid_text, const std::string& out_path, std::ostream& out) {
  if (run_dir.empty() == probs_path.empty()) throw config_error("give exactly one of --run or --probs");
  const auto src = run_dir.empty() ? probabilities_from_file(probs_path) : probabilities_from_run(run_dir, iteration);
  const auto grid = parse_grid(grid_text);
  const auto weights = sample_weights(src.preds, src.num_classes);
  const Strategy strategies[] = {Strategy::top_k, Strategy::top_p, Strategy::min_p, Strategy::min_p_plus,
                                 Strategy::min_p_plus_weighted};

  std::vector<std::vector<std::string>> rows;
  std::string records;
  for (const auto strategy : strategies) {
    const bool weighted = strategy == Strategy::min_p_plus_weighted;
    const bool plus = strategy == Strategy::min_p_plus || weighted;
    for (const double k : grid) {
      const auto w = weighted ? std::span<const double>(weights) : std::span<const double>();
      const auto found = find_threshold(src.probs, strategy, k, src.preds, w);
      const auto sets = filter_label_space(src.probs, strategy, found.param, src.preds);
      const double hit = candidate_hit_rate(sets, src.truth);
      ordered_json j = {{"strategy", std::string(to_string(strategy))},
                        {"k_target", k},
                        {"param", found.param},
                        {"achieved", found.achieved},
                        {"hit_rate", hit}};
      std::string same_p = "-";
      if (plus) {
        const auto plain = filter_label_space(src.probs, Strategy::min_p, found.param, {});
        const double plain_hit = candidate_hit_rate(plain, src.truth);
        j["min_p_hit_rate_same_p"] = plain_hit;
        same_p = fixed(plain_hit);
      }
      records += j.dump() + "\n";
      rows.push_back({std::string(to_string(strategy)), fixed(k, 2), fixed(found.param, 6), fixed(found.achieved, 3),
                      fixed(hit), same_p});
    }
  }
  out << format_table({"strategy", "k_target", "param", "achieved", "hit_rate", "min_p_hit_same_p"}, rows);
  if (!out_path.empty()) write_text(out_path, records);
  return 0;
}

int cmd_rank_compare(const std::string& run_dir, const std::string& label_embeddings, const std::string& field,
                     std::optional<int> iteration, const std::string& out_path, std::ostream& out) {
  const RunStore store(run_dir);
  auto run = open_run(run_dir);
  const int t = iteration.value_or(last_complete(store));
  if (!store.iteration_complete(t)) throw data_error("iter_" + std::to_string(t) + " is missing or unfinished");
  const auto& labels = run.dataset.label_space;
  const std::size_t k = labels.size();

  const auto label_vectors = read_vector_field(label_embeddings, "label", field);
  const auto sample_vectors = read_vector_field(run.snapshot.at("inputs").at("data").get<std::string>(), "id", field);
  auto to_matrix = [](const std::vector<const std::vector<double>*>& rows) {
    const std::size_t e = rows.front()->size();
    FeatureMatrix m(rows.size(), e);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i]->size() != e) throw data_error("embeddings differ in width");
      std::copy(rows[i]->begin(), rows[i]->end(), m.row(i).begin());
    }
    return m;
  };
  std::vector<const std::vector<double>*> lrows, srows;
  for (LabelId c = 0; c < k; ++c) {
    auto it = label_vectors.find(labels.name(c));
    if (it == label_vectors.end()) throw data_error("no embedding for label '" + labels.name(c) + "'");
    lrows.push_back(&it->second);
  }
  for (const auto& r : run.dataset.records) {
    auto it = sample_vectors.find(r.id);
    if (it == sample_vectors.end()) throw data_error("no embedding for record '" + r.id + "'");
    srows.push_back(&it->second);
  }
  const auto emb_rankings = embedding_rank(to_matrix(srows), to_matrix(lrows));

  const auto clf = TrainedClassifier::deserialize(store.read_classifier_blob(t));
  const auto probs = clf.predict_proba(FeatureMatrix::from_dataset(run.dataset));
  std::vector<std::vector<LabelId>> clf_rankings;
  for (std::size_t i = 0; i < probs.rows(); ++i) clf_rankings.push_back(rank(probs.row(i)));

  const auto truth = run.dataset.truth();
  std::vector<std::vector<std::string>> rows;
  std::string records;
  for (std::size_t kk = 1; kk <= k; ++kk) {
    const double c = hit_at_k(clf_rankings, truth, kk);
    const double e = hit_at_k(emb_rankings, truth, kk);
    rows.push_back({std::to_string(kk), fixed(c), fixed(e)});
    records += ordered_json{{"k", kk}, {"classifier", c}, {"embedding", e}}.dump() + "\n";
  }
  out << "classifier from iter_" << t << "\n";
  out << format_table({"k", "classifier_hit", "embedding_hit"}, rows);
  if (!out_path.empty()) write_text(out_path, records);
  return 0;
}

int cmd_bench(const SyntheticSpec& spec, const std::string& out_dir, std::ostream& out) {
  const auto bench = make_synthetic(spec);
  write_synthetic(bench, spec, out_dir);
  out << "synthetic benchmark -> " << out_dir << ": " << bench.train.size() << " train / " << bench.test.size()
      << " test records, " << spec.classes << " classes, d=" << spec.dim << "\n";
  return 0;
}

int cmd_eval(const std::string& predictions_path, const std::string& run_dir, const InputPaths& inputs,
             std::ostream& out) {
  Dataset data;
  fs::path preds_path = predictions_path;
  if (!run_dir.empty()) {
    auto run = open_run(run_dir);
    data = std::move(run.dataset);
    if (preds_path.empty()) preds_path = fs::path(run_dir) / "final.records";
  } else {
    if (inputs.data.empty() || inputs.labels.empty()) throw config_error("eval needs --run or both --data and --labels");
    data = load_inputs(inputs_json(inputs), 0);
  }
  if (preds_path.empty()) throw config_error("eval needs --predictions");
  const auto truth = data.truth();

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < data.size(); ++i) index[data.records[i].id] = i;
  std::vector<std::optional<LabelId>> preds(data.size());
  std::istringstream in(read_text(preds_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = ordered_json::parse(line, nullptr, false);
    const std::string where = preds_path.string() + ":" + std::to_string(line_no);
    if (j.is_discarded() || !j.contains("id") || !j.contains("label"))
      throw data_error(where + ": expected an object with \"id\" and \"label\"");
    const auto id = j.at("id").get<std::string>();
    const auto it = index.find(id);
    if (it == index.end()) throw data_error(where + ": unknown record '" + id + "'");
    const auto label = data.label_space.find(j.at("label").get<std::string>());
    if (!label) throw data_error(where + ": label '" + j.at("label").get<std::string>() + "' is not in the label space");
    preds[it->second] = label;
  }
  std::vector<LabelId> dense;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!preds[i]) throw data_error("no prediction for record '" + data.records[i].id + "'");
    dense.push_back(*preds[i]);
  }
  print_scores(out, macro_f1(dense, truth, data.label_space.size()), data.label_space);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label space reduction for LLM zero-shot classification", "lsr"};
  app.require_subcommand(1);

  ConfigSources run_cfg, distill_cfg, infer_cfg;
  InputPaths run_in, infer_in, eval_in;
  std::string run_out, distill_run, distill_out, infer_blob, infer_mode = "plain", infer_out;
  std::string ablate_run, ablate_probs, ablate_grid = "1,1.5,2,3,4,5", ablate_out;
  std::optional<int> ablate_iter, rank_iter;
  std::string rank_run, rank_labels, rank_field = "embedding", rank_out;
  std::string eval_preds, eval_run, bench_out;
  SyntheticSpec bench;

  auto* run = app.add_subcommand("run", "Iterative label-space refinement over a dataset");
  add_config_options(run, run_cfg);
  add_input_options(run, run_in, true);
  run->add_option("--subsample", run_in.subsample, "Stratified fraction of the data to label");
  run->add_option("--out", run_out, "Run directory (resumed when it already holds iterations)")->required();

  auto* dist = app.add_subcommand("distill", "Train the final classifier on every iteration's predictions");
  add_config_options(dist, distill_cfg);
  dist->add_option("--run", distill_run, "Completed run directory")->required();
  dist->add_option("--out", distill_out, "Classifier blob path")->required();

  auto* infer = app.add_subcommand("infer", "Predict new data with a distilled classifier");
  add_config_options(infer, infer_cfg);
  add_input_options(infer, infer_in, true);
  infer->add_option("--classifier", infer_blob, "Classifier blob")->required();
  infer->add_option("--mode", infer_mode, "plain | with-llm");
  infer->add_option("--out", infer_out, "Predictions file")->required();

  auto* ablate = app.add_subcommand("ablate-sampling", "Hit rate vs candidate-set size per selection strategy");
  ablate->add_option("--run", ablate_run, "Run directory (uses the classifier of --iteration)");
  ablate->add_option("--probs", ablate_probs, "Probability rows with truth, line-delimited JSON");
  ablate->add_option("--iteration", ablate_iter, "Iteration whose classifier and predictions to use (default 0)");
  ablate->add_option("--k-grid", ablate_grid, "Comma-separated target sizes");
  ablate->add_option("--out", ablate_out, "Write the table as line-delimited records");

  auto* rankc = app.add_subcommand("rank-compare", "Hit@k of classifier rankings vs embedding cosine rankings");
  rankc->add_option("--run", rank_run, "Run directory")->required();
  rankc->add_option("--label-embeddings", rank_labels, "Label embeddings, line-delimited {label, embedding}")
      ->required();
  rankc->add_option("--field", rank_field, "Embedding field name in the records");
  rankc->add_option("--iteration", rank_iter, "Iteration whose classifier to use (default last)");
  rankc->add_option("--out", rank_out, "Write the curves as line-delimited records");

  auto* bench_cmd = app.add_subcommand("bench", "Generate the synthetic Gaussian-mixture benchmark");
  bench_cmd->add_option("--out", bench_out, "Output directory")->required();
  bench_cmd->add_option("--classes", bench.classes, "Number of classes");
  bench_cmd->add_option("--per-class", bench.per_class, "Training samples per class");
  bench_cmd->add_option("--test-per-class", bench.test_per_class, "Test samples per class");
  bench_cmd->add_option("--dim", bench.dim, "Feature dimension");
  bench_cmd->add_option("--separation", bench.separation, "Typical distance between class centers");
  bench_cmd->add_option("--embedding-dim", bench.embedding_dim, "Embedding-view dimension");
  bench_cmd->add_option("--embedding-separation", bench.embedding_separation, "Center distance in the embedding view");
  bench_cmd->add_option("--seed", bench.seed, "Seed");
  bench_cmd->add_option("--mock-accuracy-full", bench.mock.accuracy_at_full, "Mock accuracy over all labels");
  bench_cmd->add_option("--mock-accuracy-two", bench.mock.accuracy_at_two, "Mock accuracy with two candidates");

  auto* eval = app.add_subcommand("eval", "Macro-F1 of a predictions file");
  eval->add_option("--predictions", eval_preds, "Line-delimited {id, label} (default: <run>/final.records)");
  eval->add_option("--run", eval_run, "Run directory supplying the data");
  add_input_options(eval, eval_in, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::config);
  }

  try {
    if (run->parsed()) return cmd_run(run_cfg, run_in, run_out, out);
    if (dist->parsed()) return cmd_distill(distill_cfg, distill_run, distill_out, out);
    if (infer->parsed()) return cmd_infer(infer_cfg, infer_in, infer_blob, infer_mode, infer_out, out);
    if (ablate->parsed()) return cmd_ablate(ablate_run, ablate_probs, ablate_iter, ablate_grid, ablate_out, out);
    if (rankc->parsed()) return cmd_rank_compare(rank_run, rank_labels, rank_field, rank_iter, rank_out, out);
    if (bench_cmd->parsed()) {
      bench.mock.validate();
      return cmd_bench(bench, bench_out, out);
    }
    if (eval->parsed()) return cmd_eval(eval_preds, eval_run, eval_in, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error (data): " << e.what() << "\n";
    return static_cast<int>(ErrorKind::data);
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << "\n";
    return static_cast<int>(ErrorKind::io);
  }
  return static_cast<int>(ErrorKind::config);
}

}  // namespace lsr
