// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "resdiff/kernels.hpp"

namespace resdiff::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  const char* env = std::getenv("RESDIFF_ISA");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::Scalar;
  return detect_isa();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

Isa detect_isa() {
  static const Isa best = (avx2::compiled() && cpu_has_avx2()) ? Isa::Avx2 : Isa::Scalar;
  return best;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

Isa set_isa(Isa isa) {
  if (isa == Isa::Avx2 && detect_isa() != Isa::Avx2) isa = Isa::Scalar;
  current().store(isa, std::memory_order_relaxed);
  return isa;
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  if (m == 0 || n == 0 || k == 0) return;
  if (active_isa() == Isa::Avx2)
    avx2::gemm(m, n, k, a, lda, b, ldb, c, ldc);
  else
    scalar::gemm(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  scalar::gemm(m, n, k, a, lda, b, ldb, c, ldc);
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  if (active_isa() == Isa::Avx2)
    avx2::axpy(n, alpha, x, y);
  else
    scalar::axpy(n, alpha, x, y);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  scalar::axpy(n, alpha, x, y);
}

float dot(std::size_t n, const float* x, const float* y) {
  return active_isa() == Isa::Avx2 ? avx2::dot(n, x, y) : scalar::dot(n, x, y);
}

double dot(std::size_t n, const double* x, const double* y) { return scalar::dot(n, x, y); }

}  // namespace resdiff::kernels
