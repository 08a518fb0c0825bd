#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lsr/kernels.hpp"

using namespace lsr;
namespace k = lsr::kernels;

namespace {

struct Case {
  k::Shape shape;
  std::vector<double> x, w, probs, sw;
  std::vector<std::uint32_t> y;
};

Case make_case(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t kk) {
  Rng rng(seed);
  Case c;
  c.shape = {n, d, kk};
  c.x.resize(n * d);
  for (auto& v : c.x) v = 3.0 * rng.normal();
  c.w.resize(kk * (d + 1));
  for (auto& v : c.w) v = rng.normal();
  c.y.resize(n);
  for (auto& v : c.y) v = static_cast<std::uint32_t>(rng.below(kk));
  c.sw.resize(n);
  for (auto& v : c.sw) v = 0.1 + rng.uniform();
  c.probs.resize(n * kk);
  k::serial::softmax_forward(c.shape, c.x, c.w, c.probs);
  return c;
}

}  // namespace

TEST_CASE("serial softmax rows are stochastic and stable for large logits") {
  auto c = make_case(1, 50, 4, 6);
  for (auto& v : c.w) v *= 400.0;
  k::serial::softmax_forward(c.shape, c.x, c.w, c.probs);
  for (std::size_t i = 0; i < c.shape.n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c.shape.k; ++j) {
      const double p = c.probs[i * c.shape.k + j];
      CHECK(std::isfinite(p));
      s += p;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax of zero weights is uniform") {
  auto c = make_case(2, 5, 3, 4);
  std::fill(c.w.begin(), c.w.end(), 0.0);
  k::parallel::softmax_forward(c.shape, c.x, c.w, c.probs);
  for (double p : c.probs) CHECK(p == 0.25);
}

TEST_CASE("gradient kernel matches a direct triple loop") {
  const auto c = make_case(3, 30, 3, 4);
  std::vector<double> grad(c.shape.k * (c.shape.d + 1));
  k::serial::nll_gradient(c.shape, c.x, c.probs, c.y, c.sw, grad);
  for (std::size_t j = 0; j < c.shape.k; ++j) {
    for (std::size_t f = 0; f <= c.shape.d; ++f) {
      double g = 0.0;
      for (std::size_t i = 0; i < c.shape.n; ++i) {
        const double r = c.probs[i * c.shape.k + j] - (c.y[i] == j ? 1.0 : 0.0);
        const double xf = f < c.shape.d ? c.x[i * c.shape.d + f] : 1.0;
        g += c.sw[i] * r * xf;
      }
      CHECK(grad[j * (c.shape.d + 1) + f] == doctest::Approx(g).epsilon(1e-12));
    }
  }
}

TEST_CASE("weighted nll matches its definition") {
  const auto c = make_case(4, 25, 2, 5);
  double expect = 0.0;
  for (std::size_t i = 0; i < c.shape.n; ++i) expect -= c.sw[i] * std::log(c.probs[i * c.shape.k + c.y[i]]);
  CHECK(k::serial::weighted_nll(c.shape, c.probs, c.y, c.sw) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("min-p sizes count ratio members plus an outside prediction") {
  const k::Shape s{2, 0, 4};
  const std::vector<double> probs = {0.5, 0.25, 0.2, 0.05, 0.25, 0.25, 0.25, 0.25};
  std::vector<std::uint32_t> sizes(2);
  k::serial::min_p_sizes(s, probs, 0.5, {}, sizes);
  CHECK(sizes == std::vector<std::uint32_t>{2, 4});
  const std::vector<std::uint32_t> preds = {3, 0};
  k::serial::min_p_sizes(s, probs, 0.5, preds, sizes);
  CHECK(sizes == std::vector<std::uint32_t>{3, 4});
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  const int saved = k::parallel::max_threads();
  for (int threads : {1, 4}) {
    k::parallel::set_threads(threads);
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
      const auto c = make_case(seed, 200 + seed * 7, 1 + seed % 5, 2 + seed % 9);
      std::vector<double> ps(c.probs.size()), pp(c.probs.size());
      k::serial::softmax_forward(c.shape, c.x, c.w, ps);
      k::parallel::softmax_forward(c.shape, c.x, c.w, pp);
      CHECK(ps == pp);

      std::vector<double> gs(c.w.size()), gp(c.w.size());
      k::serial::nll_gradient(c.shape, c.x, ps, c.y, c.sw, gs);
      k::parallel::nll_gradient(c.shape, c.x, ps, c.y, c.sw, gp);
      CHECK(gs == gp);

      CHECK(k::serial::weighted_nll(c.shape, ps, c.y, c.sw) == k::parallel::weighted_nll(c.shape, ps, c.y, c.sw));

      for (double p : {0.0, 0.1, 0.5, 0.9, 1.0}) {
        std::vector<std::uint32_t> ss(c.shape.n), sp(c.shape.n);
        k::serial::min_p_sizes(c.shape, ps, p, c.y, ss);
        k::parallel::min_p_sizes(c.shape, ps, p, c.y, sp);
        CHECK(ss == sp);
      }
    }
  }
  k::parallel::set_threads(saved);
}
