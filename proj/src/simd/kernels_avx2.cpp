// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include "iconik/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace iconik::simd::detail {

namespace {

// ---------------------------------------------------------------- GEMM f32

template <int R>
inline void gemm_rows_f32(float const *a, float const *b, float *c, std::size_t k, std::size_t n)
{
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256 acc[R][2];
    for (int r = 0; r < R; ++r) {
      acc[r][0] = _mm256_loadu_ps(c + r * n + j);
      acc[r][1] = _mm256_loadu_ps(c + r * n + j + 8);
    }
    for (std::size_t p = 0; p < k; ++p) {
      __m256 const b0 = _mm256_loadu_ps(b + p * n + j);
      __m256 const b1 = _mm256_loadu_ps(b + p * n + j + 8);
      for (int r = 0; r < R; ++r) {
        __m256 const av = _mm256_broadcast_ss(a + r * k + p);
        acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
        acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
      }
    }
    for (int r = 0; r < R; ++r) {
      _mm256_storeu_ps(c + r * n + j, acc[r][0]);
      _mm256_storeu_ps(c + r * n + j + 8, acc[r][1]);
    }
  }
  for (; j + 8 <= n; j += 8) {
    __m256 acc[R];
    for (int r = 0; r < R; ++r) { acc[r] = _mm256_loadu_ps(c + r * n + j); }
    for (std::size_t p = 0; p < k; ++p) {
      __m256 const b0 = _mm256_loadu_ps(b + p * n + j);
      for (int r = 0; r < R; ++r) {
        acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a + r * k + p), b0, acc[r]);
      }
    }
    for (int r = 0; r < R; ++r) { _mm256_storeu_ps(c + r * n + j, acc[r]); }
  }
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      float acc = c[r * n + j];
      for (std::size_t p = 0; p < k; ++p) { acc = std::fma(a[r * k + p], b[p * n + j], acc); }
      c[r * n + j] = acc;
    }
  }
}

void gemm_f32(float const *a, float const *b, float *c, std::size_t m, std::size_t k, std::size_t n)
{
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) { gemm_rows_f32<4>(a + i * k, b, c + i * n, k, n); }
  for (; i < m; ++i) { gemm_rows_f32<1>(a + i * k, b, c + i * n, k, n); }
}

// ---------------------------------------------------------------- GEMM f64

template <int R>
inline void gemm_rows_f64(double const *a, double const *b, double *c, std::size_t k, std::size_t n)
{
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d acc[R][2];
    for (int r = 0; r < R; ++r) {
      acc[r][0] = _mm256_loadu_pd(c + r * n + j);
      acc[r][1] = _mm256_loadu_pd(c + r * n + j + 4);
    }
    for (std::size_t p = 0; p < k; ++p) {
      __m256d const b0 = _mm256_loadu_pd(b + p * n + j);
      __m256d const b1 = _mm256_loadu_pd(b + p * n + j + 4);
      for (int r = 0; r < R; ++r) {
        __m256d const av = _mm256_broadcast_sd(a + r * k + p);
        acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
        acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
      }
    }
    for (int r = 0; r < R; ++r) {
      _mm256_storeu_pd(c + r * n + j, acc[r][0]);
      _mm256_storeu_pd(c + r * n + j + 4, acc[r][1]);
    }
  }
  for (; j + 4 <= n; j += 4) {
    __m256d acc[R];
    for (int r = 0; r < R; ++r) { acc[r] = _mm256_loadu_pd(c + r * n + j); }
    for (std::size_t p = 0; p < k; ++p) {
      __m256d const b0 = _mm256_loadu_pd(b + p * n + j);
      for (int r = 0; r < R; ++r) {
        acc[r] = _mm256_fmadd_pd(_mm256_broadcast_sd(a + r * k + p), b0, acc[r]);
      }
    }
    for (int r = 0; r < R; ++r) { _mm256_storeu_pd(c + r * n + j, acc[r]); }
  }
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      double acc = c[r * n + j];
      for (std::size_t p = 0; p < k; ++p) { acc = std::fma(a[r * k + p], b[p * n + j], acc); }
      c[r * n + j] = acc;
    }
  }
}

void gemm_f64(double const *a, double const *b, double *c, std::size_t m, std::size_t k, std::size_t n)
{
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) { gemm_rows_f64<4>(a + i * k, b, c + i * n, k, n); }
  for (; i < m; ++i) { gemm_rows_f64<1>(a + i * k, b, c + i * n, k, n); }
}

// ---------------------------------------------------------------- SiLU f32

// Cephes-style expf: range reduction by ln2, degree-5 polynomial.
inline __m256 exp_ps(__m256 x)
{
  x = _mm256_min_ps(_mm256_max_ps(x, _mm256_set1_ps(-87.3f)), _mm256_set1_ps(88.3f));
  __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f), _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  __m256 const x2 = _mm256_mul_ps(x, x);
  y = _mm256_fmadd_ps(y, x2, _mm256_add_ps(x, _mm256_set1_ps(1.0f)));
  __m256i e = _mm256_cvtps_epi32(fx);
  e = _mm256_slli_epi32(_mm256_add_epi32(e, _mm256_set1_epi32(127)), 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(e));
}

inline __m256 sigmoid_ps(__m256 z)
{
  __m256 const one = _mm256_set1_ps(1.0f);
  return _mm256_div_ps(one, _mm256_add_ps(one, exp_ps(_mm256_sub_ps(_mm256_setzero_ps(), z))));
}

void silu_f32(float const *z, float *y, std::size_t n)
{
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 const v = _mm256_loadu_ps(z + i);
    _mm256_storeu_ps(y + i, _mm256_mul_ps(v, sigmoid_ps(v)));
  }
  // tail through the same vector math so a value never depends on its position
  if (i < n) {
    alignas(32) float zt[8] = {}, yt[8];
    std::copy(z + i, z + n, zt);
    __m256 const v = _mm256_load_ps(zt);
    _mm256_store_ps(yt, _mm256_mul_ps(v, sigmoid_ps(v)));
    std::copy(yt, yt + (n - i), y + i);
  }
}

void silu_grad_f32(float const *z, float const *dy, float *dz, std::size_t n)
{
  __m256 const one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 const v = _mm256_loadu_ps(z + i);
    __m256 const s = sigmoid_ps(v);
    __m256 const d = _mm256_mul_ps(s, _mm256_fmadd_ps(v, _mm256_sub_ps(one, s), one));
    _mm256_storeu_ps(dz + i, _mm256_mul_ps(_mm256_loadu_ps(dy + i), d));
  }
  if (i < n) {
    alignas(32) float zt[8] = {}, dyt[8] = {}, out[8];
    std::copy(z + i, z + n, zt);
    std::copy(dy + i, dy + n, dyt);
    __m256 const v = _mm256_load_ps(zt);
    __m256 const s = sigmoid_ps(v);
    __m256 const d = _mm256_mul_ps(s, _mm256_fmadd_ps(v, _mm256_sub_ps(one, s), one));
    _mm256_store_ps(out, _mm256_mul_ps(_mm256_load_ps(dyt), d));
    std::copy(out, out + (n - i), dz + i);
  }
}

// ---------------------------------------------------------------- complex f64

cdouble cdot(cdouble const *a, cdouble const *b, std::size_t n)
{
  double const *pa = reinterpret_cast<double const *>(a);
  double const *pb = reinterpret_cast<double const *>(b);
  // straight[k] accumulates a_re*b_re, a_im*b_im; crossed accumulates a_re*b_im, a_im*b_re
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  __m256d x0 = _mm256_setzero_pd(), x1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d const a0 = _mm256_loadu_pd(pa + 2 * i);
    __m256d const a1 = _mm256_loadu_pd(pa + 2 * i + 4);
    __m256d const b0 = _mm256_loadu_pd(pb + 2 * i);
    __m256d const b1 = _mm256_loadu_pd(pb + 2 * i + 4);
    s0 = _mm256_fmadd_pd(a0, b0, s0);
    s1 = _mm256_fmadd_pd(a1, b1, s1);
    x0 = _mm256_fmadd_pd(a0, _mm256_permute_pd(b0, 0b0101), x0);
    x1 = _mm256_fmadd_pd(a1, _mm256_permute_pd(b1, 0b0101), x1);
  }
  for (; i + 2 <= n; i += 2) {
    __m256d const a0 = _mm256_loadu_pd(pa + 2 * i);
    __m256d const b0 = _mm256_loadu_pd(pb + 2 * i);
    s0 = _mm256_fmadd_pd(a0, b0, s0);
    x0 = _mm256_fmadd_pd(a0, _mm256_permute_pd(b0, 0b0101), x0);
  }
  alignas(32) double s[4], x[4];
  _mm256_store_pd(s, _mm256_add_pd(s0, s1));
  _mm256_store_pd(x, _mm256_add_pd(x0, x1));
  double re = (s[0] + s[2]) - (s[1] + s[3]);
  double im = (x[0] + x[1]) + (x[2] + x[3]);
  for (; i < n; ++i) {
    re += a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
    im += a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
  }
  return {re, im};
}

void caxpy(cdouble alpha, cdouble const *x, cdouble *y, std::size_t n)
{
  double const *px = reinterpret_cast<double const *>(x);
  double *py = reinterpret_cast<double *>(y);
  __m256d const p = _mm256_set1_pd(alpha.real());
  __m256d const q = _mm256_setr_pd(-alpha.imag(), alpha.imag(), -alpha.imag(), alpha.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d const vx = _mm256_loadu_pd(px + 2 * i);
    __m256d vy = _mm256_loadu_pd(py + 2 * i);
    vy = _mm256_fmadd_pd(p, vx, vy);
    vy = _mm256_fmadd_pd(q, _mm256_permute_pd(vx, 0b0101), vy);
    _mm256_storeu_pd(py + 2 * i, vy);
  }
  for (; i < n; ++i) {
    double const xr = x[i].real(), xi = x[i].imag();
    y[i] = {y[i].real() + (alpha.real() * xr - alpha.imag() * xi),
            y[i].imag() + (alpha.real() * xi + alpha.imag() * xr)};
  }
}

void silu_f64(double const *z, double *y, std::size_t n)
{
  for (std::size_t i = 0; i < n; ++i) { y[i] = z[i] / (1.0 + std::exp(-z[i])); }
}

void silu_grad_f64(double const *z, double const *dy, double *dz, std::size_t n)
{
  for (std::size_t i = 0; i < n; ++i) {
    double const s = 1.0 / (1.0 + std::exp(-z[i]));
    dz[i] = dy[i] * s * (1.0 + z[i] * (1.0 - s));
  }
}

} // namespace

KernelTable const *make_avx2_table()
{
  static KernelTable const table{
    .isa = Isa::Avx2,
    .gemm_f32 = &gemm_f32,
    .gemm_f64 = &gemm_f64,
    .silu_f32 = &silu_f32,
    .silu_f64 = &silu_f64,
    .silu_grad_f32 = &silu_grad_f32,
    .silu_grad_f64 = &silu_grad_f64,
    .cdot = &cdot,
    .caxpy = &caxpy,
  };
  return &table;
}

} // namespace iconik::simd::detail
