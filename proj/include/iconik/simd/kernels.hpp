#pragma once

// Data-parallel inner loops. Every kernel has a portable scalar reference and,
// where the build and CPU allow it, an AVX2+FMA variant. The variant is picked
// once at startup (ICONIK_SIMD=scalar forces the reference path) and the two
// are cross-checked in tests/test_kernels.cpp.
//
// The GEMM kernels accumulate every output element as an fma chain in
// increasing k, in both variants, so their results are bit-identical and do
// not depend on how rows are batched.

#include "iconik/types.hpp"

#include <cstddef>

namespace iconik::simd {

enum class Isa
{
  Scalar,
  Avx2,
};

char const *to_string(Isa isa);

struct KernelTable
{
  Isa isa;

  // C[m x n] += A[m x k] * B[k x n], all row-major and densely packed.
  void (*gemm_f32)(float const *a, float const *b, float *c, std::size_t m, std::size_t k, std::size_t n);
  void (*gemm_f64)(double const *a, double const *b, double *c, std::size_t m, std::size_t k, std::size_t n);

  // y = z * sigmoid(z)
  void (*silu_f32)(float const *z, float *y, std::size_t n);
  void (*silu_f64)(double const *z, double *y, std::size_t n);
  // dz = dy * silu'(z)
  void (*silu_grad_f32)(float const *z, float const *dy, float *dz, std::size_t n);
  void (*silu_grad_f64)(double const *z, double const *dy, double *dz, std::size_t n);

  // sum_i a[i] * b[i] (no conjugation)
  cdouble (*cdot)(cdouble const *a, cdouble const *b, std::size_t n);
  // y += alpha * x
  void (*caxpy)(cdouble alpha, cdouble const *x, cdouble *y, std::size_t n);
};

KernelTable const &scalar_kernels();

/// Null when the binary was built without AVX2 support or the CPU lacks it.
KernelTable const *avx2_kernels();

/// The table every module calls through.
KernelTable const &kernels();

/// Switches the active table (tests and benchmarks). Returns false if the
/// requested ISA is unavailable.
bool select_isa(Isa isa);

template <class Real>
inline void gemm(Real const *a, Real const *b, Real *c, std::size_t m, std::size_t k, std::size_t n)
{
  if constexpr (sizeof(Real) == sizeof(float)) {
    kernels().gemm_f32(a, b, c, m, k, n);
  } else {
    kernels().gemm_f64(a, b, c, m, k, n);
  }
}

template <class Real>
inline void silu(Real const *z, Real *y, std::size_t n)
{
  if constexpr (sizeof(Real) == sizeof(float)) {
    kernels().silu_f32(z, y, n);
  } else {
    kernels().silu_f64(z, y, n);
  }
}

template <class Real>
inline void silu_grad(Real const *z, Real const *dy, Real *dz, std::size_t n)
{
  if constexpr (sizeof(Real) == sizeof(float)) {
    kernels().silu_grad_f32(z, dy, dz, n);
  } else {
    kernels().silu_grad_f64(z, dy, dz, n);
  }
}

namespace detail {
// Implemented in kernels_scalar.cpp / kernels_avx2.cpp.
KernelTable make_scalar_table();
KernelTable const *make_avx2_table();
} // namespace detail

} // namespace iconik::simd
