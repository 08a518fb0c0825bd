#include <algorithm>
#include <vector>

#include "lsr/kernels.hpp"
#include "row_ops.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lsr::kernels::parallel {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

void softmax_forward(Shape s, std::span<const double> features, std::span<const double> weights,
                     std::span<double> probs) {
  const auto n = static_cast<std::ptrdiff_t>(s.n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    detail::softmax_row(s.d, s.k, features.data() + i * s.d, weights.data(), probs.data() + i * s.k);
}

// One thread per class row; each row sums samples in increasing order, which
// is the same per-element order as the serial sample-major loop.
void nll_gradient(Shape s, std::span<const double> features, std::span<const double> probs,
                  std::span<const std::uint32_t> labels, std::span<const double> sample_weights,
                  std::span<double> grad) {
  const std::size_t stride = s.d + 1;
  const auto k = static_cast<std::ptrdiff_t>(s.k);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < k; ++c) {
    double* g = grad.data() + c * stride;
    std::fill(g, g + stride, 0.0);
    for (std::size_t i = 0; i < s.n; ++i) {
      const double target = labels[i] == static_cast<std::uint32_t>(c) ? 1.0 : 0.0;
      const double coef = sample_weights[i] * (probs[i * s.k + c] - target);
      const double* x = features.data() + i * s.d;
      for (std::size_t j = 0; j < s.d; ++j) g[j] += coef * x[j];
      g[s.d] += coef;
    }
  }
}

double weighted_nll(Shape s, std::span<const double> probs, std::span<const std::uint32_t> labels,
                    std::span<const double> sample_weights) {
  std::vector<double> terms(s.n);
  const auto n = static_cast<std::ptrdiff_t>(s.n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    terms[i] = detail::nll_term(probs[i * s.k + labels[i]], sample_weights[i]);
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

void min_p_sizes(Shape s, std::span<const double> probs, double p, std::span<const std::uint32_t> preds,
                 std::span<std::uint32_t> sizes) {
  const auto n = static_cast<std::ptrdiff_t>(s.n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    sizes[i] = detail::min_p_size_row(s.k, probs.data() + i * s.k, p, preds.empty() ? nullptr : &preds[i]);
}

}  // namespace lsr::kernels::parallel
