#pragma once

#include <cstddef>

namespace picknet::nn {

// Row-major kernels used by the convolution and dense layers. Every output
// element is accumulated in a fixed order that does not depend on where the
// element sits in the matrix, so identical inputs give bitwise-identical
// results regardless of batch position.

// C[m x n] += A[m x k] * B[k x n]; each element accumulates over k in order.
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc);

// C[m x n] += A[m x k] * B[n x k]^T, computed as lane-split dot products.
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc);

template <typename T>
T dot(const T* a, const T* b, std::size_t n);

}  // namespace picknet::nn
