#include "picknet/nn/gemm.hpp"

#include <algorithm>

namespace picknet::nn {
namespace {

constexpr std::size_t kRows = 4;

// Register tile: kRows rows of C by kCols(T) columns, held in locals across
// the whole k loop.
template <typename T>
constexpr std::size_t tile_cols() {
  return 64 / sizeof(T) * 2;  // two cache lines per row
}

template <typename T, std::size_t W>
inline void tile_kernel(std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb,
                        T* c, std::size_t ldc) {
  T acc[kRows][W];
  for (std::size_t r = 0; r < kRows; ++r)
    for (std::size_t j = 0; j < W; ++j) acc[r][j] = c[r * ldc + j];
  for (std::size_t p = 0; p < k; ++p) {
    const T* bp = b + p * ldb;
    const T a0 = a[0 * lda + p], a1 = a[1 * lda + p], a2 = a[2 * lda + p], a3 = a[3 * lda + p];
    for (std::size_t j = 0; j < W; ++j) {
      const T bv = bp[j];
      acc[0][j] += a0 * bv;
      acc[1][j] += a1 * bv;
      acc[2][j] += a2 * bv;
      acc[3][j] += a3 * bv;
    }
  }
  for (std::size_t r = 0; r < kRows; ++r)
    for (std::size_t j = 0; j < W; ++j) c[r * ldc + j] = acc[r][j];
}

template <typename T>
inline void row_kernel(std::size_t n, std::size_t k, const T* a, const T* b, std::size_t ldb,
                       T* c) {
  constexpr std::size_t W = tile_cols<T>();
  std::size_t j0 = 0;
  for (; j0 + W <= n; j0 += W) {
    T acc[W];
    for (std::size_t j = 0; j < W; ++j) acc[j] = c[j0 + j];
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[p];
      const T* bp = b + p * ldb + j0;
      for (std::size_t j = 0; j < W; ++j) acc[j] += av * bp[j];
    }
    for (std::size_t j = 0; j < W; ++j) c[j0 + j] = acc[j];
  }
  for (std::size_t j = j0; j < n; ++j) {
    T acc = c[j];
    for (std::size_t p = 0; p < k; ++p) acc += a[p] * b[p * ldb + j];
    c[j] = acc;
  }
}

}  // namespace

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  constexpr std::size_t W = tile_cols<T>();
  std::size_t i = 0;
  for (; i + kRows <= m; i += kRows) {
    const T* ai = a + i * lda;
    T* ci = c + i * ldc;
    std::size_t j = 0;
    for (; j + W <= n; j += W) tile_kernel<T, W>(k, ai, lda, b + j, ldb, ci + j, ldc);
    // Narrower tiles for the remainder before falling back to single rows.
    for (; j + W / 2 <= n; j += W / 2) tile_kernel<T, W / 2>(k, ai, lda, b + j, ldb, ci + j, ldc);
    for (; j + W / 4 <= n; j += W / 4) tile_kernel<T, W / 4>(k, ai, lda, b + j, ldb, ci + j, ldc);
    if (j < n)
      for (std::size_t r = 0; r < kRows; ++r)
        row_kernel<T>(n - j, k, ai + r * lda, b + j, ldb, ci + r * ldc + j);
  }
  for (; i < m; ++i) row_kernel<T>(n, k, a + i * lda, b, ldb, c + i * ldc);
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  constexpr std::size_t L = 64 / sizeof(T);
  T lanes[L] = {};
  std::size_t p = 0;
  for (; p + L <= n; p += L)
    for (std::size_t l = 0; l < L; ++l) lanes[l] += a[p + l] * b[p + l];
  for (std::size_t l = 0; p + l < n; ++l) lanes[l] += a[p + l] * b[p + l];
  T s = 0;
  for (std::size_t l = 0; l < L; ++l) s += lanes[l];
  return s;
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] += dot(a + i * lda, b + j * ldb, k);
}

template void gemm_nn<float>(std::size_t, std::size_t, std::size_t, const float*, std::size_t,
                             const float*, std::size_t, float*, std::size_t);
template void gemm_nn<double>(std::size_t, std::size_t, std::size_t, const double*, std::size_t,
                              const double*, std::size_t, double*, std::size_t);
template void gemm_nt<float>(std::size_t, std::size_t, std::size_t, const float*, std::size_t,
                             const float*, std::size_t, float*, std::size_t);
template void gemm_nt<double>(std::size_t, std::size_t, std::size_t, const double*, std::size_t,
                              const double*, std::size_t, double*, std::size_t);
template void gemm_nn<long double>(std::size_t, std::size_t, std::size_t, const long double*, std::size_t,
                                   const long double*, std::size_t, long double*, std::size_t);
template void gemm_nt<long double>(std::size_t, std::size_t, std::size_t, const long double*, std::size_t,
                                   const long double*, std::size_t, long double*, std::size_t);
template float dot<float>(const float*, const float*, std::size_t);
template double dot<double>(const double*, const double*, std::size_t);
template long double dot<long double>(const long double*, const long double*, std::size_t);

}  // namespace picknet::nn
