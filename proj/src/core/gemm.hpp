// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

// Row-major single-precision GEMM kernels. When `accumulate` is false C is
// overwritten, otherwise the product is added to it.
namespace avmask::detail {

// C[m x n] = A[m x k] . B[k x n]
template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);
// C[m x n] = A[m x k] . B[n x k]^T
template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);
// C[m x n] = A[k x m]^T . B[k x n]
template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);

}  // namespace avmask::detail
