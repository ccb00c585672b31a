// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/kernels.hpp"

#include <cmath>

#if defined(RESDIFF_BUILD_AVX2)
#include <immintrin.h>
#endif

namespace resdiff::kernels::avx2 {

#if defined(RESDIFF_BUILD_AVX2)

bool compiled() { return true; }

namespace {

// C[4,16] += A[4,K] * B[K,16]
inline void kernel_4x16(std::size_t k, const float* a, std::size_t lda, const float* b,
                        std::size_t ldb, float* c, std::size_t ldc) {
  __m256 c00 = _mm256_loadu_ps(c), c01 = _mm256_loadu_ps(c + 8);
  __m256 c10 = _mm256_loadu_ps(c + ldc), c11 = _mm256_loadu_ps(c + ldc + 8);
  __m256 c20 = _mm256_loadu_ps(c + 2 * ldc), c21 = _mm256_loadu_ps(c + 2 * ldc + 8);
  __m256 c30 = _mm256_loadu_ps(c + 3 * ldc), c31 = _mm256_loadu_ps(c + 3 * ldc + 8);
  const float* a0 = a;
  const float* a1 = a + lda;
  const float* a2 = a + 2 * lda;
  const float* a3 = a + 3 * lda;
  for (std::size_t p = 0; p < k; ++p) {
    const float* bp = b + p * ldb;
    const __m256 b0 = _mm256_loadu_ps(bp);
    const __m256 b1 = _mm256_loadu_ps(bp + 8);
    __m256 av = _mm256_broadcast_ss(a0 + p);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(a1 + p);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(a2 + p);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(a3 + p);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
  }
  _mm256_storeu_ps(c, c00);
  _mm256_storeu_ps(c + 8, c01);
  _mm256_storeu_ps(c + ldc, c10);
  _mm256_storeu_ps(c + ldc + 8, c11);
  _mm256_storeu_ps(c + 2 * ldc, c20);
  _mm256_storeu_ps(c + 2 * ldc + 8, c21);
  _mm256_storeu_ps(c + 3 * ldc, c30);
  _mm256_storeu_ps(c + 3 * ldc + 8, c31);
}

// C[rows,8] += A[rows,K] * B[K,8], rows <= 4
inline void kernel_rx8(std::size_t rows, std::size_t k, const float* a, std::size_t lda,
                       const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  __m256 acc[4];
  for (std::size_t r = 0; r < rows; ++r) acc[r] = _mm256_loadu_ps(c + r * ldc);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 bv = _mm256_loadu_ps(b + p * ldb);
    for (std::size_t r = 0; r < rows; ++r)
      acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a + r * lda + p), bv, acc[r]);
  }
  for (std::size_t r = 0; r < rows; ++r) _mm256_storeu_ps(c + r * ldc, acc[r]);
}

// C[rows,cols] += A[rows,K] * B[K,cols] for the ragged right edge (cols < 8).
inline void kernel_edge(std::size_t rows, std::size_t cols, std::size_t k, const float* a,
                        std::size_t lda, const float* b, std::size_t ldb, float* c,
                        std::size_t ldc) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      float s = c[r * ldc + j];
      for (std::size_t p = 0; p < k; ++p) s = std::fma(a[r * lda + p], b[p * ldb + j], s);
      c[r * ldc + j] = s;
    }
  }
}

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 sh = _mm_movehdup_ps(lo);
  __m128 s = _mm_add_ps(lo, sh);
  sh = _mm_movehl_ps(sh, s);
  s = _mm_add_ss(s, sh);
  return _mm_cvtss_f32(s);
}

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  // Column panels outermost so a K x 16 slice of B stays cache-resident
  // while every row block of A streams past it.
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) kernel_4x16(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    if (i < m) {
      kernel_rx8(m - i, k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
      kernel_rx8(m - i, k, a + i * lda, lda, b + j + 8, ldb, c + i * ldc + j + 8, ldc);
    }
  }
  for (; j + 8 <= n; j += 8) {
    for (std::size_t i = 0; i < m; i += 4) {
      const std::size_t rows = m - i < 4 ? m - i : 4;
      kernel_rx8(rows, k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    }
  }
  if (j < n) {
    for (std::size_t i = 0; i < m; i += 4) {
      const std::size_t rows = m - i < 4 ? m - i : 4;
      kernel_edge(rows, n - j, k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    }
  }
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

float dot(std::size_t n, const float* x, const float* y) {
  __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
  __m256 s2 = _mm256_setzero_ps(), s3 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    s0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), s0);
    s1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), s1);
    s2 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 16), _mm256_loadu_ps(y + i + 16), s2);
    s3 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 24), _mm256_loadu_ps(y + i + 24), s3);
  }
  for (; i + 8 <= n; i += 8)
    s0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), s0);
  float s = hsum(_mm256_add_ps(_mm256_add_ps(s0, s1), _mm256_add_ps(s2, s3)));
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

#else

bool compiled() { return false; }

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  scalar::gemm(m, n, k, a, lda, b, ldb, c, ldc);
}
void axpy(std::size_t n, float alpha, const float* x, float* y) { scalar::axpy(n, alpha, x, y); }
float dot(std::size_t n, const float* x, const float* y) { return scalar::dot(n, x, y); }

#endif

}  // namespace resdiff::kernels::avx2
