#include "lsr/engine.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "lsr/error.hpp"
#include "lsr/random.hpp"
#include "lsr/selection.hpp"

namespace lsr {

namespace {

// Deployment passes draw from their own mock stream, apart from any loop iteration.
constexpr int kDeploymentIteration = 1 << 20;

std::vector<LabelId> vote(std::span<const std::vector<LabelId>> rounds, std::vector<std::size_t>* tied) {
  if (rounds.empty()) throw data_error("majority vote over an empty history");
  const std::size_t n = rounds.front().size();
  for (const auto& r : rounds)
    if (r.size() != n) throw data_error("prediction rounds differ in length");
  std::vector<LabelId> out(n);
  std::map<LabelId, std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    counts.clear();
    for (const auto& r : rounds) ++counts[r[i]];
    std::size_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    std::size_t at_best = 0;
    for (const auto& [label, c] : counts) at_best += c == best ? 1 : 0;
    // Walk back from the latest round to the first label with the top count.
    for (auto r = rounds.rbegin(); r != rounds.rend(); ++r) {
      if (counts[(*r)[i]] == best) {
        out[i] = (*r)[i];
        break;
      }
    }
    if (at_best > 1 && tied) tied->push_back(i);
  }
  return out;
}

std::vector<std::vector<LabelId>> rounds_of(std::span<const IterationRecord> history) {
  std::vector<std::vector<LabelId>> rounds;
  rounds.reserve(history.size());
  for (const auto& rec : history) rounds.push_back(rec.predictions.preds);
  return rounds;
}

LabelId mode_lower_id(std::span<const LabelId> labels, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (auto y : labels) ++counts[y];
  return static_cast<LabelId>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::vector<LabelId> shuffled_label_order(std::size_t k, std::uint64_t seed) {
  std::vector<LabelId> order(k);
  std::iota(order.begin(), order.end(), LabelId{0});
  Rng(derive_seed(seed, "labels")).shuffle(order);
  return order;
}

void require_valid(const Dataset& dataset) {
  const auto violations = validate_dataset(dataset);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw data_error("invalid dataset (" + std::to_string(violations.size()) + " violations), first: record '" +
                     v.record_id + "' " + v.rule + ": " + v.message);
  }
}

// Runs fn(b) for b in [0, count) on up to `workers` threads. The first failure
// (lowest batch index) is rethrown after every started batch has finished.
template <typename Fn>
void dispatch(std::size_t count, int workers, Fn fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= count || failed.load()) return;
      try {
        fn(b);
      } catch (...) {
        errors[b] = std::current_exception();
        failed.store(true);
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::clamp<long long>(workers, 1, static_cast<long long>(count)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<LabelId> majority_vote(std::span<const std::vector<LabelId>> rounds) { return vote(rounds, nullptr); }

PredictionVector majority_vote(std::span<const IterationRecord> history) {
  const auto rounds = rounds_of(history);
  return {vote(rounds, nullptr), {}};
}

LabelingPass label_dataset(const Dataset& dataset, const std::vector<CandidateSet>* candidates, Labeler& labeler,
                           const LabelingContext& context, int batch_size, std::uint64_t shuffle_seed,
                           std::optional<LabelId> prior_mode) {
  const std::size_t n = dataset.size();
  const std::size_t k = dataset.label_space.size();
  if (batch_size < 1) throw config_error("batch size must be at least 1");
  if (candidates && candidates->size() != n) throw data_error("candidate sets do not cover the dataset");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng(shuffle_seed).shuffle(order);
  const auto bs = static_cast<std::size_t>(batch_size);
  const std::size_t batches = (n + bs - 1) / bs;

  std::vector<BatchOutcome> outcomes(batches);
  dispatch(batches, labeler.max_in_flight(), [&](std::size_t b) {
    std::vector<BatchCase> cases;
    for (std::size_t j = b * bs; j < std::min(n, (b + 1) * bs); ++j) {
      const std::size_t i = order[j];
      BatchCase c{&dataset.records[i], i, std::nullopt};
      if (candidates) c.candidates = (*candidates)[i].labels;
      cases.push_back(std::move(c));
    }
    auto out = labeler.label_batch(cases, dataset.label_space, context);
    if (out.cases.size() != cases.size())
      throw llm_error("labeler returned " + std::to_string(out.cases.size()) + " cases for a batch of " +
                      std::to_string(cases.size()));
    outcomes[b] = std::move(out);
  });

  LabelingPass pass;
  pass.predictions.preds.assign(n, 0);
  pass.predictions.rationales.assign(n, "");
  pass.raw_labels.assign(n, "");
  pass.fallback.assign(n, false);
  std::vector<std::optional<LabelId>> resolved(n);
  std::vector<LabelId> resolved_values;
  for (std::size_t b = 0; b < batches; ++b) {
    for (const auto& e : outcomes[b].events)
      pass.events.push_back("t=" + std::to_string(context.iteration) + " batch=" + std::to_string(b) + " " + e);
    for (std::size_t c = 0; c < outcomes[b].cases.size(); ++c) {
      const std::size_t i = order[b * bs + c];
      const auto& cp = outcomes[b].cases[c];
      pass.raw_labels[i] = cp.raw_label;
      pass.predictions.rationales[i] = cp.analysis;
      if (cp.label && *cp.label < k) {
        resolved[i] = cp.label;
        resolved_values.push_back(*cp.label);
      }
    }
  }

  std::optional<LabelId> default_label = prior_mode;
  if (!default_label && !resolved_values.empty()) default_label = mode_lower_id(resolved_values, k);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = order[j];
    if (resolved[i]) {
      pass.predictions.preds[i] = *resolved[i];
      continue;
    }
    LabelId fb = default_label.value_or(0);
    std::string source = default_label ? "most frequent label" : "label 0";
    if (candidates && !(*candidates)[i].labels.empty()) {
      fb = (*candidates)[i].labels.front();
      source = "top candidate";
    }
    pass.predictions.preds[i] = fb;
    pass.fallback[i] = true;
    pass.events.push_back("t=" + std::to_string(context.iteration) + " fallback record='" + dataset.records[i].id +
                          "' raw='" + pass.raw_labels[i] + "' -> '" + dataset.label_space.name(fb) + "' (" + source +
                          ")");
  }
  return pass;
}

RunHistory run_lsr(const Dataset& dataset, const RunConfig& config, Labeler& labeler,
                   const ClassifierBackend& backend, const RunOptions& options) {
  config.validate();
  require_valid(dataset);
  const std::size_t k = dataset.label_space.size();
  const auto features = FeatureMatrix::from_dataset(dataset);

  RunHistory history;
  history.config = config;
  history.label_order = shuffled_label_order(k, config.seed);

  std::optional<RunStore> store;
  if (options.run_dir) {
    store.emplace(*options.run_dir);
    nlohmann::ordered_json snapshot = {{"config", to_json(config)}, {"inputs", options.inputs}};
    if (auto existing = store->read_config()) {
      auto strip = [](nlohmann::ordered_json j) {
        if (j.contains("config")) j["config"].erase("iterations");
        return j;
      };
      if (strip(*existing) != strip(snapshot))
        throw config_error("run directory " + store->dir().string() +
                           " was created with a different configuration; only the iteration count may change on resume");
    }
    store->write_config(snapshot);
  }

  auto record_events = [&](std::vector<std::string> lines) {
    if (store) store->append_events(lines);
    history.events.insert(history.events.end(), lines.begin(), lines.end());
  };

  for (int t = 0; t <= config.iterations; ++t) {
    if (store && store->iteration_complete(t)) {
      auto rec = store->read_iteration(t, dataset);
      history.classifiers.push_back(backend.load(store->read_classifier_blob(t)));
      history.iterations.push_back(std::move(rec));
      history.events.push_back("t=" + std::to_string(t) + " loaded from run directory");
      continue;
    }

    IterationRecord rec;
    rec.t = t;
    std::optional<LabelId> prior_mode;
    if (t > 0) {
      const auto& prev = history.iterations.back().predictions.preds;
      const auto probs = history.classifiers.back()->predict_proba(features);
      if (config.k_target.is_full()) {
        rec.candidate_sets = rank_label_space(probs);
      } else {
        const auto weights = config.strategy == Strategy::min_p_plus_weighted ? sample_weights(prev, k)
                                                                               : std::vector<double>{};
        const auto found = find_threshold(probs, config.strategy, config.k_target.get(), prev, weights);
        rec.threshold = found.param;
        rec.candidate_sets = filter_label_space(probs, config.strategy, found.param, prev);
      }
      prior_mode = mode_lower_id(prev, k);
    }

    LabelingContext context;
    context.iteration = t;
    context.temperature = config.llm.temperature;
    context.label_order = history.label_order;
    auto pass = label_dataset(dataset, rec.candidate_sets ? &*rec.candidate_sets : nullptr, labeler, context,
                              config.batch_size, derive_seed(config.seed, "batches", static_cast<std::uint64_t>(t)),
                              prior_mode);
    rec.predictions = std::move(pass.predictions);
    rec.raw_labels = std::move(pass.raw_labels);
    rec.fallback = std::move(pass.fallback);
    record_events(std::move(pass.events));

    auto clf = backend.train(features, rec.predictions.preds, k, dataset.label_space.hash());
    rec.classifier_ref = "iter_" + std::to_string(t) + "/classifier.blob";
    if (store) store->write_iteration(rec, dataset, clf->serialize());
    history.classifiers.push_back(std::move(clf));
    history.iterations.push_back(std::move(rec));
  }

  const auto rounds = rounds_of(history.iterations);
  std::vector<std::size_t> tied;
  history.final_predictions.preds = vote(rounds, &tied);
  std::vector<std::string> tie_events;
  for (auto i : tied)
    tie_events.push_back("vote tie record='" + dataset.records[i].id + "' -> '" +
                         dataset.label_space.name(history.final_predictions.preds[i]) + "' (latest iteration)");
  record_events(std::move(tie_events));

  if (dataset.has_truth()) history.metrics = iteration_report(history.iterations, dataset.truth(), k);
  if (store) {
    if (!history.metrics.empty()) store->write_metrics(history.metrics);
    store->write_final(history.final_predictions, dataset);
  }
  return history;
}

PredictionVector self_consistency(const Dataset& dataset, const RunConfig& config, Labeler& labeler, int resamples,
                                  double temperature) {
  if (resamples < 1) throw config_error("self-consistency needs at least one resample");
  config.validate();
  require_valid(dataset);
  const auto order = shuffled_label_order(dataset.label_space.size(), config.seed);
  std::vector<std::vector<LabelId>> rounds;
  for (int r = 0; r < resamples; ++r) {
    LabelingContext context;
    context.iteration = 0;
    context.draw = temperature > 0.0 ? r : 0;
    context.temperature = temperature;
    context.label_order = order;
    auto pass = label_dataset(dataset, nullptr, labeler, context, config.batch_size,
                              derive_seed(config.seed, "batches", 0, static_cast<std::uint64_t>(r)));
    rounds.push_back(std::move(pass.predictions.preds));
  }
  return {majority_vote(rounds), {}};
}

TrainedClassifier distill(const Dataset& dataset, std::span<const IterationRecord> history,
                          const ClassifierConfig& config) {
  if (history.empty()) throw data_error("distillation needs at least one iteration");
  const auto base = FeatureMatrix::from_dataset(dataset);
  const std::size_t n = base.rows();
  const std::size_t d = base.cols();
  std::vector<double> data;
  std::vector<LabelId> labels;
  data.reserve(n * d * history.size());
  labels.reserve(n * history.size());
  for (const auto& rec : history) {
    if (rec.predictions.size() != n)
      throw data_error("iteration " + std::to_string(rec.t) + " has " + std::to_string(rec.predictions.size()) +
                       " predictions for " + std::to_string(n) + " records");
    data.insert(data.end(), base.data().begin(), base.data().end());
    labels.insert(labels.end(), rec.predictions.preds.begin(), rec.predictions.preds.end());
  }
  const FeatureMatrix replicated(n * history.size(), d, std::move(data));
  return train_classifier(replicated, labels, dataset.label_space.size(), config, dataset.label_space.hash());
}

DirectInference direct_infer(const Classifier& classifier, const Dataset& data, const DirectInferOptions& options) {
  if (classifier.dim() != data.dim)
    throw data_error("classifier expects " + std::to_string(classifier.dim()) + " features but the data has " +
                     std::to_string(data.dim));
  if (classifier.num_classes() != data.label_space.size())
    throw data_error("classifier has " + std::to_string(classifier.num_classes()) + " classes but the label space has " +
                     std::to_string(data.label_space.size()));
  const auto probs = classifier.predict_proba(FeatureMatrix::from_dataset(data));
  DirectInference out;
  out.predictions.preds = argmax_rows(probs);
  if (!options.labeler) return out;

  const std::size_t k = data.label_space.size();
  const auto weights = sample_weights(out.predictions.preds, k);
  const auto found = find_threshold(probs, Strategy::min_p, options.k_target, {}, weights);
  out.threshold = found.param;
  out.weighted_mean_size = found.achieved;
  out.candidates = filter_label_space(probs, Strategy::min_p, found.param, {});

  const auto order = shuffled_label_order(k, options.seed);
  LabelingContext context;
  context.iteration = kDeploymentIteration;
  context.label_order = order;
  auto pass = label_dataset(data, &out.candidates, *options.labeler, context, options.batch_size,
                            derive_seed(options.seed, "batches", kDeploymentIteration));
  out.predictions = std::move(pass.predictions);
  out.events = std::move(pass.events);
  return out;
}

}  // namespace lsr
