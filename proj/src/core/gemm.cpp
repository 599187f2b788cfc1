// SPDX-License-Identifier: Apache-2.0
#include "gemm.hpp"

#include <algorithm>
#include <vector>

namespace avmask::detail {

namespace {

// Four rows of C share each streamed row of B; the j loop vectorises.
template <class T>
void gemm_nn_kernel(const T* a, std::size_t lda, const T* b, T* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    T* c0 = c + (i + 0) * n;
    T* c1 = c + (i + 1) * n;
    T* c2 = c + (i + 2) * n;
    T* c3 = c + (i + 3) * n;
    const T* a0 = a + (i + 0) * lda;
    const T* a1 = a + (i + 1) * lda;
    const T* a2 = a + (i + 2) * lda;
    const T* a3 = a + (i + 3) * lda;
    for (std::size_t p = 0; p < k; ++p) {
      const T* bp = b + p * n;
      const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      for (std::size_t j = 0; j < n; ++j) {
        const T bv = bp[j];
        c0[j] += v0 * bv;
        c1[j] += v1 * bv;
        c2[j] += v2 * bv;
        c3[j] += v3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * lda;
    for (std::size_t p = 0; p < k; ++p) {
      const T* bp = b + p * n;
      const T v = ai[p];
      for (std::size_t j = 0; j < n; ++j) ci[j] += v * bp[j];
    }
  }
}

}  // namespace

template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T{0});
  gemm_nn_kernel(a, k, b, c, m, k, n);
}

template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(a, bt.data(), c, m, k, n, accumulate);
}

template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T{0});
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    T* c0 = c + (i + 0) * n;
    T* c1 = c + (i + 1) * n;
    T* c2 = c + (i + 2) * n;
    T* c3 = c + (i + 3) * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* ap = a + p * m + i;
      const T* bp = b + p * n;
      const T v0 = ap[0], v1 = ap[1], v2 = ap[2], v3 = ap[3];
      for (std::size_t j = 0; j < n; ++j) {
        const T bv = bp[j];
        c0[j] += v0 * bv;
        c1[j] += v1 * bv;
        c2[j] += v2 * bv;
        c3[j] += v3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    T* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T v = a[p * m + i];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += v * bp[j];
    }
  }
}

#define AVMASK_INSTANTIATE_GEMM(T)                                                                    \
  template void gemm_nn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool); \
  template void gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool); \
  template void gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);

AVMASK_INSTANTIATE_GEMM(float)
AVMASK_INSTANTIATE_GEMM(double)

}  // namespace avmask::detail
