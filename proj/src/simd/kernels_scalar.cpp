#include "iconik/simd/kernels.hpp"

#include <cmath>

namespace iconik::simd::detail {

namespace {

template <class Real>
void gemm_ref(Real const *a, Real const *b, Real *c, std::size_t m, std::size_t k, std::size_t n)
{
  for (std::size_t i = 0; i < m; ++i) {
    Real const *arow = a + i * k;
    Real *crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      Real acc = crow[j];
      for (std::size_t p = 0; p < k; ++p) {
        acc = std::fma(arow[p], b[p * n + j], acc);
      }
      crow[j] = acc;
    }
  }
}

template <class Real>
void silu_ref(Real const *z, Real *y, std::size_t n)
{
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = z[i] / (Real(1) + std::exp(-z[i]));
  }
}

template <class Real>
void silu_grad_ref(Real const *z, Real const *dy, Real *dz, std::size_t n)
{
  for (std::size_t i = 0; i < n; ++i) {
    Real const s = Real(1) / (Real(1) + std::exp(-z[i]));
    dz[i] = dy[i] * s * (Real(1) + z[i] * (Real(1) - s));
  }
}

cdouble cdot_ref(cdouble const *a, cdouble const *b, std::size_t n)
{
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    re += a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
    im += a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
  }
  return {re, im};
}

void caxpy_ref(cdouble alpha, cdouble const *x, cdouble *y, std::size_t n)
{
  double const p = alpha.real(), q = alpha.imag();
  for (std::size_t i = 0; i < n; ++i) {
    double const xr = x[i].real(), xi = x[i].imag();
    y[i] = {y[i].real() + (p * xr - q * xi), y[i].imag() + (p * xi + q * xr)};
  }
}

} // namespace

KernelTable make_scalar_table()
{
  return KernelTable{
    .isa = Isa::Scalar,
    .gemm_f32 = &gemm_ref<float>,
    .gemm_f64 = &gemm_ref<double>,
    .silu_f32 = &silu_ref<float>,
    .silu_f64 = &silu_ref<double>,
    .silu_grad_f32 = &silu_grad_ref<float>,
    .silu_grad_f64 = &silu_grad_ref<double>,
    .cdot = &cdot_ref,
    .caxpy = &caxpy_ref,
  };
}

} // namespace iconik::simd::detail
