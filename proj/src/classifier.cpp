#include "lsr/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <set>

#include "lsr/error.hpp"
#include "lsr/kernels.hpp"
#include "lsr/random.hpp"

namespace lsr {

static_assert(std::endian::native == std::endian::little, "classifier blobs assume a little-endian host");

SplitIndices stratified_split(std::span<const LabelId> labels, double fraction, std::uint64_t seed) {
  if (labels.size() < 2) throw data_error("stratified split needs at least 2 samples");
  if (!(fraction > 0.0 && fraction < 1.0)) throw config_error("hold-out fraction must lie in (0,1)");
  std::map<LabelId, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);

  SplitIndices split;
  for (auto& [label, members] : groups) {
    const auto m = members.size();
    auto h = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(m) + 0.5));
    h = std::min(h, m - 1);
    Rng rng(derive_seed(seed, "split", label));
    rng.shuffle(members);
    split.holdout.insert(split.holdout.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(h));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(h), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  return split;
}

std::vector<double> class_weights(std::span<const LabelId> labels, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (auto y : labels) {
    if (y >= num_classes) throw data_error("label id out of range in class_weights");
    ++counts[y];
  }
  const auto observed = static_cast<double>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  std::vector<double> w(num_classes, 0.0);
  const auto n = static_cast<double>(labels.size());
  for (std::size_t c = 0; c < num_classes; ++c)
    if (counts[c] > 0) w[c] = n / (observed * static_cast<double>(counts[c]));
  return w;
}

std::vector<LabelId> argmax_rows(const ProbabilityMatrix& probs) {
  std::vector<LabelId> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    out[i] = static_cast<LabelId>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

// ---------------------------------------------------------------------------

TrainedClassifier::TrainedClassifier(std::size_t num_classes, std::size_t dim, std::vector<double> weights,
                                     std::uint64_t label_hash, TrainingInfo info)
    : k_(num_classes), d_(dim), weights_(std::move(weights)), label_hash_(label_hash), info_(info) {
  if (weights_.size() != k_ * (d_ + 1)) throw data_error("classifier weight matrix has the wrong size");
  if (std::any_of(weights_.begin(), weights_.end(), [](double w) { return !std::isfinite(w); }))
    throw data_error("classifier has non-finite weights");
}

ProbabilityMatrix TrainedClassifier::predict_proba(const FeatureMatrix& features) const {
  if (features.rows() > 0 && features.cols() != d_)
    throw data_error("feature width " + std::to_string(features.cols()) + " does not match classifier width " +
                     std::to_string(d_));
  std::vector<double> probs(features.rows() * k_);
  kernels::parallel::softmax_forward({features.rows(), d_, k_}, features.data(), weights_, probs);
  return ProbabilityMatrix(features.rows(), k_, std::move(probs));
}

namespace {

constexpr char kMagic[8] = {'L', 'S', 'R', 'C', 'L', 'F', '\0', '\1'};
constexpr std::uint32_t kBlobVersion = 1;

class BlobWriter {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  std::vector<std::uint8_t> bytes;
};

class BlobReader {
 public:
  explicit BlobReader(std::span<const std::uint8_t> b) : bytes_(b) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw data_error("classifier blob is truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> TrainedClassifier::serialize() const {
  BlobWriter w;
  for (char c : kMagic) w.put(c);
  w.put(kBlobVersion);
  w.put(static_cast<std::uint64_t>(k_));
  w.put(static_cast<std::uint64_t>(d_));
  w.put(label_hash_);
  w.put(static_cast<std::int64_t>(info_.epochs));
  w.put(info_.holdout_loss);
  w.put(info_.initial_holdout_loss);
  w.put(info_.step_size);
  w.put(static_cast<std::uint64_t>(info_.train_rows));
  w.put(static_cast<std::uint64_t>(info_.holdout_rows));
  for (double v : weights_) w.put(v);
  return std::move(w.bytes);
}

TrainedClassifier TrainedClassifier::deserialize(std::span<const std::uint8_t> blob) {
  BlobReader r(blob);
  for (char c : kMagic)
    if (r.get<char>() != c) throw data_error("not a classifier blob (bad magic)");
  if (const auto v = r.get<std::uint32_t>(); v != kBlobVersion)
    throw data_error("unsupported classifier blob version " + std::to_string(v));
  const auto k = r.get<std::uint64_t>();
  const auto d = r.get<std::uint64_t>();
  const auto hash = r.get<std::uint64_t>();
  TrainingInfo info;
  info.epochs = static_cast<int>(r.get<std::int64_t>());
  info.holdout_loss = r.get<double>();
  info.initial_holdout_loss = r.get<double>();
  info.step_size = r.get<double>();
  info.train_rows = r.get<std::uint64_t>();
  info.holdout_rows = r.get<std::uint64_t>();
  if (k < 2 || k > (1u << 20) || d > (1u << 24)) throw data_error("classifier blob has implausible dimensions");
  std::vector<double> weights(k * (d + 1));
  for (auto& v : weights) v = r.get<double>();
  if (!r.done()) throw data_error("classifier blob has trailing bytes");
  return TrainedClassifier(k, d, std::move(weights), hash, info);
}

// ---------------------------------------------------------------------------

double softmax_objective(const FeatureMatrix& features, std::span<const LabelId> labels,
                         std::span<const double> sample_weights, std::span<const double> weights,
                         std::size_t num_classes, double l2, std::span<double> grad) {
  const kernels::Shape s{features.rows(), features.cols(), num_classes};
  std::vector<double> probs(s.n * s.k);
  kernels::parallel::softmax_forward(s, features.data(), weights, probs);

  double total_weight = 0.0;
  for (double w : sample_weights) total_weight += w;
  if (!(total_weight > 0.0)) throw data_error("sample weights sum to zero");

  double loss = kernels::parallel::weighted_nll(s, probs, labels, sample_weights) / total_weight;
  const std::size_t stride = s.d + 1;
  for (std::size_t c = 0; c < s.k; ++c)
    for (std::size_t j = 0; j < s.d; ++j) loss += 0.5 * l2 * weights[c * stride + j] * weights[c * stride + j];

  if (!grad.empty()) {
    kernels::parallel::nll_gradient(s, features.data(), probs, labels, sample_weights, grad);
    for (std::size_t c = 0; c < s.k; ++c) {
      for (std::size_t j = 0; j < s.d; ++j)
        grad[c * stride + j] = grad[c * stride + j] / total_weight + l2 * weights[c * stride + j];
      grad[c * stride + s.d] /= total_weight;
    }
  }
  return loss;
}

namespace {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const FeatureMatrix& x) {
    Standardizer st;
    st.mean.assign(x.cols(), 0.0);
    st.scale.assign(x.cols(), 1.0);
    const auto n = static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) st.mean[j] += x(i, j);
    for (auto& m : st.mean) m /= n;
    std::vector<double> var(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) var[j] += (x(i, j) - st.mean[j]) * (x(i, j) - st.mean[j]);
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double sd = std::sqrt(var[j] / n);
      st.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return st;
  }

  FeatureMatrix apply(const FeatureMatrix& x) const {
    FeatureMatrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean[j]) / scale[j];
    return out;
  }

  // Rewrites weights learned on standardized inputs so they act on raw inputs.
  std::vector<double> fold(std::span<const double> w, std::size_t k) const {
    const std::size_t d = mean.size();
    std::vector<double> out(w.begin(), w.end());
    for (std::size_t c = 0; c < k; ++c) {
      double shift = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        out[c * (d + 1) + j] = w[c * (d + 1) + j] / scale[j];
        shift += w[c * (d + 1) + j] * mean[j] / scale[j];
      }
      out[c * (d + 1) + d] = w[c * (d + 1) + d] - shift;
    }
    return out;
  }
};

FeatureMatrix take_rows(const FeatureMatrix& x, std::span<const std::size_t> idx) {
  FeatureMatrix out(idx.size(), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(x.row(idx[r]).begin(), x.cols(), out.row(r).begin());
  return out;
}

template <typename T>
std::vector<T> take(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

// Lipschitz bound of the objective's gradient: 0.5 * lambda_max(sum w x x^T / sum w) + l2,
// with lambda_max estimated by power iteration on the (d+1)x(d+1) second-moment matrix.
double lipschitz_bound(const FeatureMatrix& x, std::span<const double> w, double l2) {
  const std::size_t d1 = x.cols() + 1;
  std::vector<double> m(d1 * d1, 0.0);
  double total = 0.0;
  std::vector<double> xt(d1, 1.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::copy_n(x.row(i).begin(), x.cols(), xt.begin());
    for (std::size_t a = 0; a < d1; ++a)
      for (std::size_t b = 0; b < d1; ++b) m[a * d1 + b] += w[i] * xt[a] * xt[b];
    total += w[i];
  }
  for (auto& v : m) v /= total;
  std::vector<double> v(d1, 1.0), mv(d1);
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    for (std::size_t a = 0; a < d1; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < d1; ++b) s += m[a * d1 + b] * v[b];
      mv[a] = s;
    }
    double norm = 0.0;
    for (double e : mv) norm += e * e;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    lambda = norm;
    for (std::size_t a = 0; a < d1; ++a) v[a] = mv[a] / norm;
  }
  return 0.5 * lambda + l2;
}

struct GradientDescent {
  const FeatureMatrix& x;
  std::span<const LabelId> y;
  std::span<const double> w;
  std::size_t k;
  double l2;
  double step;
  std::vector<double> weights;
  std::vector<double> grad;

  GradientDescent(const FeatureMatrix& xs, std::span<const LabelId> ys, std::span<const double> ws, std::size_t nk,
                  const ClassifierConfig& cfg)
      : x(xs), y(ys), w(ws), k(nk), l2(cfg.l2),
        step(std::min(cfg.learning_rate, 1.0 / lipschitz_bound(xs, ws, cfg.l2))),
        weights(nk * (xs.cols() + 1), 0.0), grad(weights.size()) {}

  void epoch() {
    softmax_objective(x, y, w, weights, k, l2, grad);
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] -= step * grad[i];
  }
};

double holdout_loss(const FeatureMatrix& x, std::span<const LabelId> y, std::span<const double> w,
                    std::span<const double> weights, std::size_t k) {
  return softmax_objective(x, y, w, weights, k, 0.0, {});
}

}  // namespace

TrainedClassifier train_classifier(const FeatureMatrix& features, std::span<const LabelId> labels,
                                   std::size_t num_classes, const ClassifierConfig& config,
                                   std::uint64_t label_hash) {
  config.validate();
  const std::size_t n = features.rows();
  if (labels.size() != n) throw data_error("label count does not match feature rows");
  if (n < 4) throw data_error("training needs at least 4 samples, got " + std::to_string(n));
  if (std::any_of(features.data().begin(), features.data().end(), [](double v) { return !std::isfinite(v); }))
    throw data_error("non-finite features");
  std::set<LabelId> distinct(labels.begin(), labels.end());
  if (*distinct.rbegin() >= num_classes) throw data_error("label id out of range");
  if (distinct.size() < 2) throw data_error("single-class input: training needs at least 2 distinct labels");

  const std::vector<double> cw =
      config.class_weighting ? class_weights(labels, num_classes) : std::vector<double>(num_classes, 1.0);
  std::vector<double> sample_w(n);
  for (std::size_t i = 0; i < n; ++i) sample_w[i] = cw[labels[i]];

  // Phase one: early stopping against the hold-out split.
  const auto split = stratified_split(labels, config.holdout_fraction, config.seed);
  TrainingInfo info;
  info.train_rows = split.train.size();
  info.holdout_rows = split.holdout.size();
  int best_epoch = config.max_epochs;
  {
    const FeatureMatrix train_raw = take_rows(features, split.train);
    const auto st = Standardizer::fit(train_raw);
    const FeatureMatrix train_x = st.apply(train_raw);
    const auto train_y = take<LabelId>(labels, split.train);
    const auto train_w = take<double>(sample_w, split.train);
    GradientDescent gd(train_x, train_y, train_w, num_classes, config);
    if (!split.holdout.empty()) {
      const FeatureMatrix hold_x = st.apply(take_rows(features, split.holdout));
      const auto hold_y = take<LabelId>(labels, split.holdout);
      const auto hold_w = take<double>(sample_w, split.holdout);
      double best = holdout_loss(hold_x, hold_y, hold_w, gd.weights, num_classes);
      info.initial_holdout_loss = best;
      best_epoch = 0;
      for (int e = 1; e <= config.max_epochs; ++e) {
        gd.epoch();
        const double loss = holdout_loss(hold_x, hold_y, hold_w, gd.weights, num_classes);
        if (loss < best) {
          best = loss;
          best_epoch = e;
        } else if (e - best_epoch >= config.patience) {
          break;
        }
      }
      info.holdout_loss = best;
    }
  }

  // Phase two: same hyperparameters, every row, frozen epoch budget.
  const auto st = Standardizer::fit(features);
  const FeatureMatrix all_x = st.apply(features);
  GradientDescent gd(all_x, labels, sample_w, num_classes, config);
  for (int e = 0; e < best_epoch; ++e) gd.epoch();
  info.epochs = best_epoch;
  info.step_size = gd.step;
  return TrainedClassifier(num_classes, features.cols(), st.fold(gd.weights, num_classes), label_hash, info);
}

std::shared_ptr<const Classifier> LogisticBackend::train(const FeatureMatrix& features, std::span<const LabelId> labels,
                                                         std::size_t num_classes, std::uint64_t label_hash) const {
  return std::make_shared<TrainedClassifier>(train_classifier(features, labels, num_classes, config_, label_hash));
}

std::shared_ptr<const Classifier> LogisticBackend::load(std::span<const std::uint8_t> blob) const {
  return std::make_shared<TrainedClassifier>(TrainedClassifier::deserialize(blob));
}

}  // namespace lsr
