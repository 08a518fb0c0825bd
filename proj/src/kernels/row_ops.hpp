#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace lsr::kernels::detail {

// probs_row = softmax(W [x; 1]) for one sample.
inline void softmax_row(std::size_t d, std::size_t k, const double* x, const double* weights, double* out) {
  double max_logit = -INFINITY;
  for (std::size_t c = 0; c < k; ++c) {
    const double* w = weights + c * (d + 1);
    double z = w[d];
    for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
    out[c] = z;
    max_logit = std::max(max_logit, z);
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    out[c] = std::exp(out[c] - max_logit);
    sum += out[c];
  }
  for (std::size_t c = 0; c < k; ++c) out[c] /= sum;
}

inline std::uint32_t min_p_size_row(std::size_t k, const double* row, double p, const std::uint32_t* pred) {
  double mx = 0.0;
  for (std::size_t c = 0; c < k; ++c) mx = std::max(mx, row[c]);
  std::uint32_t count = 0;
  bool pred_in = pred == nullptr;
  for (std::size_t c = 0; c < k; ++c) {
    if (row[c] / mx >= p) {
      ++count;
      if (pred && c == *pred) pred_in = true;
    }
  }
  return count + (pred_in ? 0u : 1u);
}

inline double nll_term(double prob, double weight) {
  // Clamp keeps the loss finite when a probability underflows to zero.
  return -weight * std::log(std::max(prob, 1e-300));
}

}  // namespace lsr::kernels::detail
