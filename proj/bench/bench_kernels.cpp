// Serial reference vs OpenMP kernels on classifier-sized problems.
#include <benchmark/benchmark.h>

#include <vector>

#include "lsr/kernels.hpp"
#include "lsr/random.hpp"

namespace {

using lsr::kernels::Shape;

struct Problem {
  Shape shape;
  std::vector<double> features, weights, probs, sample_weights, grad;
  std::vector<std::uint32_t> labels;

  explicit Problem(std::size_t n, std::size_t d = 64, std::size_t k = 77) : shape{n, d, k} {
    lsr::Rng rng(n);
    features.resize(n * d);
    for (auto& v : features) v = rng.normal();
    weights.resize(k * (d + 1));
    for (auto& v : weights) v = 0.1 * rng.normal();
    probs.resize(n * k);
    labels.resize(n);
    for (auto& y : labels) y = static_cast<std::uint32_t>(rng.below(k));
    sample_weights.assign(n, 1.0);
    grad.resize(k * (d + 1));
    lsr::kernels::serial::softmax_forward(shape, features, weights, probs);
  }
};

template <bool Parallel>
void BM_softmax_forward(benchmark::State& state) {
  Problem p(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel)
      lsr::kernels::parallel::softmax_forward(p.shape, p.features, p.weights, p.probs);
    else
      lsr::kernels::serial::softmax_forward(p.shape, p.features, p.weights, p.probs);
    benchmark::DoNotOptimize(p.probs.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_nll_gradient(benchmark::State& state) {
  Problem p(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel)
      lsr::kernels::parallel::nll_gradient(p.shape, p.features, p.probs, p.labels, p.sample_weights, p.grad);
    else
      lsr::kernels::serial::nll_gradient(p.shape, p.features, p.probs, p.labels, p.sample_weights, p.grad);
    benchmark::DoNotOptimize(p.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_min_p_sizes(benchmark::State& state) {
  Problem p(static_cast<std::size_t>(state.range(0)));
  std::vector<std::uint32_t> sizes(p.shape.n);
  for (auto _ : state) {
    if constexpr (Parallel)
      lsr::kernels::parallel::min_p_sizes(p.shape, p.probs, 0.3, p.labels, sizes);
    else
      lsr::kernels::serial::min_p_sizes(p.shape, p.probs, 0.3, p.labels, sizes);
    benchmark::DoNotOptimize(sizes.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_softmax_forward<false>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_softmax_forward<true>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_nll_gradient<false>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_nll_gradient<true>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_min_p_sizes<false>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_min_p_sizes<true>)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
