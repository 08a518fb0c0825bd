#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "lsr/core.hpp"
#include "lsr/random.hpp"

namespace lsr::testing {

inline LabelSpace letters(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) names.push_back(std::string("label_") + static_cast<char>('a' + i));
  return LabelSpace(names);
}

// Random probability row of width k; some rows carry exact ties and zeros.
inline std::vector<double> random_row(Rng& rng, std::size_t k) {
  std::vector<double> row(k);
  const auto style = rng.below(4);
  for (auto& v : row) {
    if (style == 0)
      v = static_cast<double>(rng.below(4));  // coarse values, many ties and zeros
    else
      v = -std::log(1.0 - rng.uniform());
  }
  double s = std::accumulate(row.begin(), row.end(), 0.0);
  if (s == 0.0) {
    row[rng.below(k)] = 1.0;
    s = 1.0;
  }
  for (auto& v : row) v /= s;
  return row;
}

inline ProbabilityMatrix random_probs(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<double> data;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = random_row(rng, k);
    data.insert(data.end(), r.begin(), r.end());
  }
  return ProbabilityMatrix(n, k, std::move(data));
}

// Gaussian blobs with truth, ids "r000"...
inline Dataset blobs(std::size_t k, std::size_t per_class, std::size_t d, double spread, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.label_space = letters(k);
  ds.dim = d;
  std::vector<std::vector<double>> centers(k, std::vector<double>(d));
  for (auto& c : centers)
    for (auto& v : c) v = spread * rng.normal();
  for (std::size_t i = 0; i < k * per_class; ++i) {
    SampleRecord r;
    r.id = "r" + std::to_string(1000 + i).substr(1);
    const auto y = static_cast<LabelId>(i % k);
    r.truth = y;
    r.semantic = {{"text", "sample " + std::to_string(i)}};
    for (std::size_t j = 0; j < d; ++j) r.features.push_back(centers[y][j] + rng.normal());
    ds.records.push_back(std::move(r));
  }
  return ds;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lsr_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace lsr::testing
