#pragma once

// Data-parallel inner loops of the classifier and the threshold search.
//
// Every kernel exists twice: `parallel::` (OpenMP) used by the library and
// `serial::` kept as the reference the tests compare against. Each output
// element is accumulated in the same order in both versions, so results are
// bit-identical regardless of thread count.

#include <cstddef>
#include <cstdint>
#include <span>

namespace lsr::kernels {

// Shapes: features n x d, weights K x (d+1) with the bias in the last column,
// probs n x K, all row-major.
struct Shape {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t k = 0;
};

#define LSR_KERNEL_DECLS                                                                          \
  /* probs[i] = softmax(W [x_i; 1]) */                                                            \
  void softmax_forward(Shape s, std::span<const double> features, std::span<const double> weights, \
                       std::span<double> probs);                                                  \
  /* grad = sum_i w_i (probs_i - onehot(y_i)) [x_i; 1]^T, overwriting grad */                     \
  void nll_gradient(Shape s, std::span<const double> features, std::span<const double> probs,     \
                    std::span<const std::uint32_t> labels, std::span<const double> sample_weights, \
                    std::span<double> grad);                                                      \
  /* sum_i -w_i log probs[i][y_i] */                                                              \
  double weighted_nll(Shape s, std::span<const double> probs, std::span<const std::uint32_t> labels, \
                      std::span<const double> sample_weights);                                    \
  /* sizes[i] = |{y : P(y)/max P >= p} u {pred_i}|; preds may be empty (plain Min-p) */           \
  void min_p_sizes(Shape s, std::span<const double> probs, double p,                              \
                   std::span<const std::uint32_t> preds, std::span<std::uint32_t> sizes);

namespace serial {
LSR_KERNEL_DECLS
}  // namespace serial

namespace parallel {
LSR_KERNEL_DECLS
// Number of threads OpenMP would use; 1 when built without OpenMP.
int max_threads();
void set_threads(int n);
}  // namespace parallel

#undef LSR_KERNEL_DECLS

}  // namespace lsr::kernels
