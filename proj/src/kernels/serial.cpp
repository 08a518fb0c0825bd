#include "lsr/kernels.hpp"

#include <algorithm>

#include "row_ops.hpp"

namespace lsr::kernels::serial {

void softmax_forward(Shape s, std::span<const double> features, std::span<const double> weights,
                     std::span<double> probs) {
  for (std::size_t i = 0; i < s.n; ++i)
    detail::softmax_row(s.d, s.k, features.data() + i * s.d, weights.data(), probs.data() + i * s.k);
}

void nll_gradient(Shape s, std::span<const double> features, std::span<const double> probs,
                  std::span<const std::uint32_t> labels, std::span<const double> sample_weights,
                  std::span<double> grad) {
  const std::size_t stride = s.d + 1;
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t i = 0; i < s.n; ++i) {
    const double* x = features.data() + i * s.d;
    for (std::size_t c = 0; c < s.k; ++c) {
      const double target = labels[i] == c ? 1.0 : 0.0;
      const double coef = sample_weights[i] * (probs[i * s.k + c] - target);
      double* g = grad.data() + c * stride;
      for (std::size_t j = 0; j < s.d; ++j) g[j] += coef * x[j];
      g[s.d] += coef;
    }
  }
}

double weighted_nll(Shape s, std::span<const double> probs, std::span<const std::uint32_t> labels,
                    std::span<const double> sample_weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.n; ++i)
    total += detail::nll_term(probs[i * s.k + labels[i]], sample_weights[i]);
  return total;
}

void min_p_sizes(Shape s, std::span<const double> probs, double p, std::span<const std::uint32_t> preds,
                 std::span<std::uint32_t> sizes) {
  for (std::size_t i = 0; i < s.n; ++i)
    sizes[i] = detail::min_p_size_row(s.k, probs.data() + i * s.k, p, preds.empty() ? nullptr : &preds[i]);
}

}  // namespace lsr::kernels::serial
