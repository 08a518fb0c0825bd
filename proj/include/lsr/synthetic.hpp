#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "lsr/config.hpp"
#include "lsr/core.hpp"

namespace lsr {

// Gaussian-mixture benchmark. Class centers are separation * u_g with
// u_g ~ N(0, I / (2 d)), so two centers sit about `separation` apart; samples
// add unit-variance noise. A second, weaker mixture supplies the "embedding"
// view used by the cosine-ranking baseline.
struct SyntheticSpec {
  std::size_t classes = 20;
  std::size_t per_class = 60;
  std::size_t dim = 16;
  double separation = 10.0;
  std::size_t test_per_class = 20;
  std::size_t embedding_dim = 16;
  double embedding_separation = 4.0;
  std::uint64_t seed = 0;
  MockParams mock;
};

struct SyntheticBenchmark {
  Dataset train;
  Dataset test;
  FeatureMatrix train_embeddings;
  FeatureMatrix test_embeddings;
  FeatureMatrix label_embeddings;  // K x embedding_dim, the embedding-view class centers
};

SyntheticBenchmark make_synthetic(const SyntheticSpec& spec);

// Writes train.jsonl, test.jsonl, labels.txt, label_embeddings.jsonl and a
// mock-mode run config (config.json) into `dir`.
void write_synthetic(const SyntheticBenchmark& bench, const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace lsr
