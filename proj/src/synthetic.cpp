#include "lsr/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "lsr/error.hpp"
#include "lsr/random.hpp"

namespace lsr {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string class_name(std::size_t g, std::size_t classes) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(classes - 1).size());
  std::string digits = std::to_string(g);
  return "class_" + std::string(width - digits.size(), '0') + digits;
}

FeatureMatrix centers(std::size_t k, std::size_t d, double separation, Rng& rng) {
  FeatureMatrix c(k, d);
  const double scale = separation / std::sqrt(2.0 * static_cast<double>(d));
  for (auto& v : c.data()) v = scale * rng.normal();
  return c;
}

struct Split {
  Dataset data;
  FeatureMatrix embeddings;
};

Split draw(const SyntheticSpec& spec, const LabelSpace& labels, const FeatureMatrix& feat_centers,
           const FeatureMatrix& emb_centers, std::size_t per_class, const std::string& prefix, Rng& rng) {
  const std::size_t n = spec.classes * per_class;
  std::vector<LabelId> truth(n);
  for (std::size_t i = 0; i < n; ++i) truth[i] = static_cast<LabelId>(i % spec.classes);
  rng.shuffle(truth);

  Split out;
  out.data.label_space = labels;
  out.data.dim = spec.dim;
  out.embeddings = FeatureMatrix(n, spec.embedding_dim);
  const std::size_t width = std::to_string(n - 1).size();
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord r;
    const std::string digits = std::to_string(i);
    r.id = prefix + std::string(width - digits.size(), '0') + digits;
    r.semantic = {{"text", "synthetic sample " + std::to_string(i)}};
    r.truth = truth[i];
    r.features.resize(spec.dim);
    for (std::size_t j = 0; j < spec.dim; ++j) r.features[j] = feat_centers(truth[i], j) + rng.normal();
    for (std::size_t j = 0; j < spec.embedding_dim; ++j) out.embeddings(i, j) = emb_centers(truth[i], j) + rng.normal();
    out.data.records.push_back(std::move(r));
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw io_error("short write to " + path.string());
}

ordered_json vector_json(std::span<const double> v) { return ordered_json(std::vector<double>(v.begin(), v.end())); }

std::string records_text(const Dataset& data, const FeatureMatrix& embeddings) {
  std::string text;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    ordered_json j;
    j["id"] = r.id;
    for (const auto& [k, v] : r.semantic) j[k] = v;
    j["features"] = r.features;
    j["embedding"] = vector_json(embeddings.row(i));
    j["label"] = data.label_space.name(*r.truth);
    text += j.dump() + "\n";
  }
  return text;
}

}  // namespace

SyntheticBenchmark make_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw config_error("synthetic benchmark needs at least 2 classes");
  if (spec.per_class < 1) throw config_error("synthetic benchmark needs at least 1 sample per class");
  if (spec.dim < 1 || spec.embedding_dim < 1) throw config_error("synthetic dimensions must be positive");
  if (!(spec.separation >= 0.0) || !(spec.embedding_separation >= 0.0))
    throw config_error("separations must be non-negative");

  std::vector<std::string> names;
  for (std::size_t g = 0; g < spec.classes; ++g) names.push_back(class_name(g, spec.classes));
  LabelSpace labels(names);

  Rng center_rng(derive_seed(spec.seed, "bench-centers"));
  const auto feat_centers = centers(spec.classes, spec.dim, spec.separation, center_rng);
  const auto emb_centers = centers(spec.classes, spec.embedding_dim, spec.embedding_separation, center_rng);

  Rng train_rng(derive_seed(spec.seed, "bench-train"));
  Rng test_rng(derive_seed(spec.seed, "bench-test"));
  auto train = draw(spec, labels, feat_centers, emb_centers, spec.per_class, "s", train_rng);

  SyntheticBenchmark bench;
  bench.train = std::move(train.data);
  bench.train_embeddings = std::move(train.embeddings);
  if (spec.test_per_class > 0) {
    auto test = draw(spec, labels, feat_centers, emb_centers, spec.test_per_class, "t", test_rng);
    bench.test = std::move(test.data);
    bench.test_embeddings = std::move(test.embeddings);
  } else {
    bench.test.label_space = labels;
    bench.test.dim = spec.dim;
  }
  bench.label_embeddings = emb_centers;
  return bench;
}

void write_synthetic(const SyntheticBenchmark& bench, const SyntheticSpec& spec, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());

  write_file(dir / "train.jsonl", records_text(bench.train, bench.train_embeddings));
  write_file(dir / "test.jsonl", records_text(bench.test, bench.test_embeddings));

  std::string label_text;
  for (const auto& name : bench.train.label_space.names()) label_text += name + "\n";
  write_file(dir / "labels.txt", label_text);

  std::string emb_text;
  for (std::size_t g = 0; g < bench.label_embeddings.rows(); ++g) {
    ordered_json j;
    j["label"] = bench.train.label_space.name(static_cast<LabelId>(g));
    j["embedding"] = vector_json(bench.label_embeddings.row(g));
    emb_text += j.dump() + "\n";
  }
  write_file(dir / "label_embeddings.jsonl", emb_text);

  RunConfig config;
  config.seed = spec.seed;
  config.llm.mode = LlmMode::mock;
  auto j = to_json(config);
  j["llm"]["mock"]["accuracy_at_full"] = spec.mock.accuracy_at_full;
  j["llm"]["mock"]["accuracy_at_two"] = spec.mock.accuracy_at_two;
  j["llm"]["mock"].erase("seed");
  j["classifier"].erase("seed");
  ordered_json scenario = {{"classes", spec.classes},       {"per_class", spec.per_class},
                           {"dim", spec.dim},               {"separation", spec.separation},
                           {"test_per_class", spec.test_per_class}, {"embedding_dim", spec.embedding_dim},
                           {"embedding_separation", spec.embedding_separation}, {"seed", spec.seed}};
  write_file(dir / "config.json", j.dump(2) + "\n");
  write_file(dir / "scenario.json", scenario.dump(2) + "\n");
}

}  // namespace lsr
