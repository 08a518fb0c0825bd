#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace lsr {

// Mixes a root seed with a purpose tag and indices so that each consumer of
// randomness (shuffle, split, mock, bench) draws from an independent stream.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s);
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0);

// mt19937_64 engine with portable bounded draws; std distributions are
// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  // Uniform real in [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lsr
