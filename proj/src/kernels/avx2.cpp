// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the dispatcher has confirmed CPU support.

#include <immintrin.h>

#include "lwta/kernels.hpp"

namespace lwta::kernels::detail {
namespace {

template <class T>
struct Lanes;

template <>
struct Lanes<float> {
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

template <>
struct Lanes<double> {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

template <class T>
T dot(const T* x, const T* y, std::size_t n) {
  using L = Lanes<T>;
  constexpr std::size_t w = L::width;
  auto acc0 = L::zero();
  auto acc1 = L::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    acc0 = L::fmadd(L::load(x + i), L::load(y + i), acc0);
    acc1 = L::fmadd(L::load(x + i + w), L::load(y + i + w), acc1);
  }
  for (; i + w <= n; i += w) acc0 = L::fmadd(L::load(x + i), L::load(y + i), acc0);
  T acc = L::hsum(L::add(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  using L = Lanes<T>;
  constexpr std::size_t w = L::width;
  const auto va = L::set1(a);
  std::size_t i = 0;
  for (; i + w <= n; i += w) L::store(y + i, L::fmadd(va, L::load(x + i), L::load(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void axpby(std::size_t n, T a, const T* x, T b, T* y) {
  using L = Lanes<T>;
  constexpr std::size_t w = L::width;
  const auto va = L::set1(a);
  const auto vb = L::set1(b);
  std::size_t i = 0;
  for (; i + w <= n; i += w) {
    L::store(y + i, L::fmadd(va, L::load(x + i), L::mul(vb, L::load(y + i))));
  }
  for (; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

template <class T>
void mul(std::size_t n, const T* x, const T* y, T* out) {
  using L = Lanes<T>;
  constexpr std::size_t w = L::width;
  std::size_t i = 0;
  for (; i + w <= n; i += w) L::store(out + i, L::mul(L::load(x + i), L::load(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

template <class T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0;
    }
    for (std::size_t p = 0; p < k; ++p) axpy(n, a[i * k + p], b + p * n, crow);
  }
}

template <class T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* g, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy(n, a[i * k + p], grow, c + p * n);
  }
}

template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* g, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) c[i * k + p] += dot(g + i * n, b + p * n, n);
  }
}

}  // namespace

template <class T>
const KernelTable<T>& avx2_table() {
  static const KernelTable<T> t{&dot<T>, &axpy<T>, &axpby<T>, &mul<T>,
                                &gemm_nn<T>, &gemm_tn<T>, &gemm_nt<T>};
  return t;
}

template const KernelTable<float>& avx2_table<float>();
template const KernelTable<double>& avx2_table<double>();

}  // namespace lwta::kernels::detail
