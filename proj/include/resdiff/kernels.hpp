// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

// Dense arithmetic kernels used by the denoiser. Every kernel has a scalar
// reference implementation; float kernels additionally have an AVX2+FMA
// variant that is selected at runtime when the CPU supports it.
//
// All matrices are row-major with explicit leading dimensions.

namespace resdiff::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

// Best ISA supported by both this build and the running CPU.
Isa detect_isa();

// The ISA used by the dispatching entry points below. Starts as
// detect_isa(), or Scalar when RESDIFF_ISA=scalar is set in the environment.
Isa active_isa();

// Forces an ISA; requesting one the CPU lacks falls back to Scalar.
// Returns the ISA actually selected.
Isa set_isa(Isa isa);

// C[M,N] += A[M,K] * B[K,N]
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc);
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc);

// y += alpha * x
void axpy(std::size_t n, float alpha, const float* x, float* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);

// sum_i x[i] * y[i]
float dot(std::size_t n, const float* x, const float* y);
double dot(std::size_t n, const double* x, const double* y);

// dst[N,M] = src[M,N]^T
template <class T>
void transpose(std::size_t m, std::size_t n, const T* src, std::size_t lds, T* dst,
               std::size_t ldd);

// Direct access to each variant, for equivalence testing.
namespace scalar {
template <class T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
          std::size_t ldb, T* c, std::size_t ldc);
template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y);
template <class T>
T dot(std::size_t n, const T* x, const T* y);
}  // namespace scalar

namespace avx2 {
// Only callable when detect_isa() == Isa::Avx2.
bool compiled();
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc);
void axpy(std::size_t n, float alpha, const float* x, float* y);
float dot(std::size_t n, const float* x, const float* y);
}  // namespace avx2

}  // namespace resdiff::kernels
