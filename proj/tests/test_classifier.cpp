#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "lsr/classifier.hpp"
#include "lsr/error.hpp"

using namespace lsr;

namespace {

std::vector<LabelId> repeat_classes(std::initializer_list<std::size_t> counts) {
  std::vector<LabelId> y;
  LabelId c = 0;
  for (auto m : counts) {
    for (std::size_t i = 0; i < m; ++i) y.push_back(c);
    ++c;
  }
  return y;
}

std::map<LabelId, std::size_t> holdout_counts(const SplitIndices& s, const std::vector<LabelId>& y) {
  std::map<LabelId, std::size_t> out;
  for (auto i : s.holdout) ++out[y[i]];
  return out;
}

struct Blobs {
  FeatureMatrix x;
  std::vector<LabelId> y;
};

// Two 2-D Gaussian clusters, centers 10 sigma apart.
Blobs two_clusters(std::uint64_t seed, std::size_t per = 100) {
  Rng rng(seed);
  Blobs b{FeatureMatrix(2 * per, 2), {}};
  for (std::size_t i = 0; i < 2 * per; ++i) {
    const LabelId c = i < per ? 0 : 1;
    b.x(i, 0) = (c ? 5.0 : -5.0) + rng.normal();
    b.x(i, 1) = rng.normal();
    b.y.push_back(c);
  }
  return b;
}

// Multiclass perceptron; returns true when it reaches zero training errors.
bool perceptron_separates(const FeatureMatrix& x, const std::vector<LabelId>& y, std::size_t k) {
  const std::size_t d = x.cols();
  std::vector<double> w(k * (d + 1), 0.0);
  for (int epoch = 0; epoch < 1000; ++epoch) {
    std::size_t errors = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      std::size_t best = 0;
      double best_s = -1e300;
      for (std::size_t c = 0; c < k; ++c) {
        double s = w[c * (d + 1) + d];
        for (std::size_t j = 0; j < d; ++j) s += w[c * (d + 1) + j] * x(i, j);
        if (s > best_s) best_s = s, best = c;
      }
      if (best != y[i]) {
        ++errors;
        for (std::size_t j = 0; j <= d; ++j) {
          const double xf = j < d ? x(i, j) : 1.0;
          w[y[i] * (d + 1) + j] += xf;
          w[best * (d + 1) + j] -= xf;
        }
      }
    }
    if (errors == 0) return true;
  }
  return false;
}

double accuracy(const Classifier& clf, const FeatureMatrix& x, const std::vector<LabelId>& y) {
  const auto pred = argmax_rows(clf.predict_proba(x));
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += pred[i] == y[i] ? 1 : 0;
  return static_cast<double>(ok) / y.size();
}

}  // namespace

TEST_CASE("stratified split sizes") {
  SUBCASE("5/5 at 0.2") {
    const auto y = repeat_classes({5, 5});
    CHECK(holdout_counts(stratified_split(y, 0.2, 1), y) == std::map<LabelId, std::size_t>{{0, 1}, {1, 1}});
  }
  SUBCASE("singleton class stays in train") {
    const auto y = repeat_classes({1, 9});
    const auto s = stratified_split(y, 0.2, 1);
    CHECK(holdout_counts(s, y)[0] == 0);
    CHECK(std::count(s.train.begin(), s.train.end(), std::size_t{0}) == 1);
  }
  SUBCASE("4x25 at 0.2") {
    const auto y = repeat_classes({25, 25, 25, 25});
    CHECK(holdout_counts(stratified_split(y, 0.2, 3), y) ==
          std::map<LabelId, std::size_t>{{0, 5}, {1, 5}, {2, 5}, {3, 5}});
  }
  SUBCASE("n < 2") { CHECK_THROWS_AS(stratified_split(std::vector<LabelId>{0}, 0.2, 1), Error); }
}

TEST_CASE("stratified split partitions and follows the counting rule") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LabelId> y;
    const std::size_t k = 2 + rng.below(5);
    for (std::size_t i = 0; i < 2 + rng.below(80); ++i) y.push_back(static_cast<LabelId>(rng.below(k)));
    const double f = 0.05 + 0.9 * rng.uniform();
    const auto s = stratified_split(y, f, trial);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto i : s.holdout) CHECK(all.insert(i).second);
    CHECK(all.size() == y.size());
    std::map<LabelId, std::size_t> m;
    for (auto c : y) ++m[c];
    auto h = holdout_counts(s, y);
    for (auto [c, mc] : m) {
      const auto want = std::min<std::size_t>(static_cast<std::size_t>(std::floor(f * mc + 0.5)), mc - 1);
      CHECK(h[c] == want);
    }
    CHECK(stratified_split(y, f, trial).holdout == s.holdout);
  }
}

TEST_CASE("class weights") {
  CHECK(class_weights(std::vector<LabelId>{0, 0, 1, 1}, 2) == std::vector<double>{1.0, 1.0});
  const auto w = class_weights(std::vector<LabelId>{0, 0, 0, 1}, 2);
  CHECK(w[0] == doctest::Approx(4.0 / 6.0));
  CHECK(w[1] == doctest::Approx(2.0));
  CHECK(class_weights(std::vector<LabelId>{0, 0, 2}, 3)[1] == 0.0);
}

TEST_CASE("weighted sample count equals n when every class is observed") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(8);
    std::vector<LabelId> y;
    for (LabelId c = 0; c < k; ++c) y.push_back(c);
    for (std::size_t i = 0; i < rng.below(100); ++i) y.push_back(static_cast<LabelId>(rng.below(k)));
    const auto w = class_weights(y, k);
    double total = 0.0;
    for (auto c : y) total += w[c];
    CHECK(std::abs(total - static_cast<double>(y.size())) <= 1e-9);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 20, d = 3, k = 4;
    FeatureMatrix x(n, d);
    for (auto& v : x.data()) v = rng.normal();
    std::vector<LabelId> y(n);
    for (auto& v : y) v = static_cast<LabelId>(rng.below(k));
    std::vector<double> sw(n);
    for (auto& v : sw) v = 0.2 + rng.uniform();
    std::vector<double> w(k * (d + 1));
    for (auto& v : w) v = 0.5 * rng.normal();
    const double l2 = 0.05 * trial;

    std::vector<double> grad(w.size());
    softmax_objective(x, y, sw, w, k, l2, grad);
    const double h = 1e-5;
    for (std::size_t p = 0; p < w.size(); ++p) {
      auto wp = w, wm = w;
      wp[p] += h;
      wm[p] -= h;
      const double fd = (softmax_objective(x, y, sw, wp, k, l2, {}) - softmax_objective(x, y, sw, wm, k, l2, {})) /
                        (2 * h);
      const double rel = std::abs(fd - grad[p]) / std::max(1e-8, std::max(std::abs(fd), std::abs(grad[p])));
      CHECK(rel <= 1e-4);
    }
  }
}

TEST_CASE("separable clusters are fit perfectly") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto b = two_clusters(seed);
    REQUIRE(perceptron_separates(b.x, b.y, 2));
    const auto clf = train_classifier(b.x, b.y, 2, ClassifierConfig{});
    CHECK(accuracy(clf, b.x, b.y) == 1.0);
  }
}

TEST_CASE("training is bit-identical under the same seed") {
  const auto ds = lsr::testing::blobs(5, 30, 4, 2.0, 4);
  const auto x = FeatureMatrix::from_dataset(ds);
  const auto y = ds.truth();
  ClassifierConfig cfg;
  cfg.seed = 77;
  const auto a = train_classifier(x, y, 5, cfg);
  const auto b = train_classifier(x, y, 5, cfg);
  CHECK(a.weights() == b.weights());
  CHECK(a.serialize() == b.serialize());
}

TEST_CASE("best hold-out loss never exceeds the zero-model loss") {
  Rng rng(30);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ds = lsr::testing::blobs(3 + trial % 4, 20, 3, 0.5 + trial * 0.3, 100 + trial);
    auto y = ds.truth();
    for (auto& v : y)
      if (rng.uniform() < 0.3) v = static_cast<LabelId>(rng.below(ds.label_space.size()));
    ClassifierConfig cfg;
    cfg.seed = trial;
    const auto clf = train_classifier(FeatureMatrix::from_dataset(ds), y, ds.label_space.size(), cfg);
    CHECK(clf.info().holdout_loss <= clf.info().initial_holdout_loss);
    CHECK(clf.info().epochs >= 1);
    CHECK(clf.info().epochs <= cfg.max_epochs);
  }
}

TEST_CASE("training preconditions") {
  FeatureMatrix x(6, 1, {1, 2, 3, 4, 5, 6});
  SUBCASE("single-class input") {
    try {
      train_classifier(x, std::vector<LabelId>(6, 1), 3, ClassifierConfig{});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("single-class input") != std::string::npos);
    }
  }
  SUBCASE("non-finite features") {
    x(2, 0) = std::nan("");
    CHECK_THROWS_AS(train_classifier(x, std::vector<LabelId>{0, 1, 0, 1, 0, 1}, 2, ClassifierConfig{}), Error);
  }
  SUBCASE("too few rows") {
    FeatureMatrix small(3, 1, {1, 2, 3});
    CHECK_THROWS_AS(train_classifier(small, std::vector<LabelId>{0, 1, 0}, 2, ClassifierConfig{}), Error);
  }
}

TEST_CASE("zero weights predict uniform rows; empty input gives an empty matrix") {
  const TrainedClassifier clf(4, 3, std::vector<double>(4 * 4, 0.0));
  const auto p = clf.predict_proba(FeatureMatrix(2, 3, {1, 2, 3, -4, 5, 6}));
  for (double v : p.data()) CHECK(v == 0.25);
  CHECK(clf.predict_proba(FeatureMatrix(0, 3)).rows() == 0);
  CHECK_THROWS_AS(clf.predict_proba(FeatureMatrix(1, 2)), Error);
}

TEST_CASE("trained classifier predicts its own separable training labels") {
  const auto ds = lsr::testing::blobs(4, 25, 5, 8.0, 12);
  const auto x = FeatureMatrix::from_dataset(ds);
  const auto y = ds.truth();
  const auto clf = train_classifier(x, y, 4, ClassifierConfig{});
  CHECK(accuracy(clf, x, y) == 1.0);
}

TEST_CASE("serialization round trip reproduces probabilities bit-exactly") {
  const auto ds = lsr::testing::blobs(3, 20, 2, 1.0, 5);
  const auto x = FeatureMatrix::from_dataset(ds);
  const auto clf = train_classifier(x, ds.truth(), 3, ClassifierConfig{}, ds.label_space.hash());
  const auto blob = clf.serialize();
  const auto back = TrainedClassifier::deserialize(blob);
  CHECK(back.label_hash() == ds.label_space.hash());
  CHECK(back.info().epochs == clf.info().epochs);
  CHECK(back.predict_proba(x).data() == clf.predict_proba(x).data());

  auto broken = blob;
  broken[0] ^= 0xff;
  CHECK_THROWS_AS(TrainedClassifier::deserialize(broken), Error);
  CHECK_THROWS_AS(TrainedClassifier::deserialize(std::span<const std::uint8_t>(blob.data(), blob.size() - 3)), Error);
}

TEST_CASE("probabilities are equivariant under relabeling of weight rows") {
  Rng rng(40);
  const std::size_t k = 5, d = 3;
  std::vector<double> w(k * (d + 1));
  for (auto& v : w) v = rng.normal();
  std::vector<LabelId> perm = {3, 0, 4, 1, 2};
  std::vector<double> wp(w.size());
  for (std::size_t c = 0; c < k; ++c)
    std::copy(w.begin() + c * (d + 1), w.begin() + (c + 1) * (d + 1), wp.begin() + perm[c] * (d + 1));
  FeatureMatrix x(10, d);
  for (auto& v : x.data()) v = rng.normal();
  const auto p = TrainedClassifier(k, d, w).predict_proba(x);
  const auto q = TrainedClassifier(k, d, wp).predict_proba(x);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < k; ++c) CHECK(q(i, perm[c]) == doctest::Approx(p(i, c)).epsilon(1e-14));
}

TEST_CASE("argmax ties go to the lower id") {
  const ProbabilityMatrix p(3, 3, {0.1, 0.8, 0.1, 0.4, 0.2, 0.4, 0.2, 0.4, 0.4});
  CHECK(argmax_rows(p) == std::vector<LabelId>{1, 0, 1});
}

TEST_CASE("logistic backend round trips through its blob") {
  const auto ds = lsr::testing::blobs(3, 15, 2, 3.0, 6);
  const auto x = FeatureMatrix::from_dataset(ds);
  const LogisticBackend backend(ClassifierConfig{});
  const auto clf = backend.train(x, ds.truth(), 3, ds.label_space.hash());
  const auto loaded = backend.load(clf->serialize());
  CHECK(loaded->predict_proba(x).data() == clf->predict_proba(x).data());
}
