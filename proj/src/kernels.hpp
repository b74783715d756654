#pragma once

#include <cstddef>
#include <vector>

// Dense matrix kernels. Each output element accumulates over the inner
// dimension in a fixed order, so a row's result never depends on which other
// rows share the batch (required for bitwise set-encoder invariance).
namespace cif::kernels {

/// c (m×n) += a (m×k) · b (k×n)
template <typename T>
void gemm_nn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* __restrict ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      const T* __restrict bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

/// c (k×n) += aᵀ · g, with a (m×k) and g (m×n)
template <typename T>
void gemm_tn_acc(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    const T* __restrict gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      T* __restrict cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * gi[j];
    }
  }
}

template <typename T>
std::vector<T> transpose(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

/// c (m×k) += g (m×n) · bᵀ, with b (k×n)
template <typename T>
void gemm_nt_acc(const T* g, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  const std::vector<T> bt = transpose(b, k, n);
  gemm_nn_acc(g, bt.data(), c, m, n, k);
}

}  // namespace cif::kernels
