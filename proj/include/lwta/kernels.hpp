#pragma once

// Inner-loop arithmetic kernels. Every kernel has a portable scalar reference
// and, on x86-64, an AVX2+FMA variant. The active backend is chosen once at
// first use from CPU features; LWTA_KERNELS=scalar|avx2 in the environment or
// set_backend() overrides it.

#include <cstddef>
#include <span>
#include <string_view>

namespace lwta::kernels {

enum class Backend { scalar, avx2 };

template <class T>
struct KernelTable {
  // sum_i x[i] * y[i]
  T (*dot)(const T* x, const T* y, std::size_t n);
  // y += a * x
  void (*axpy)(std::size_t n, T a, const T* x, T* y);
  // y = a * x + b * y
  void (*axpby)(std::size_t n, T a, const T* x, T b, T* y);
  // out = x * y (elementwise)
  void (*mul)(std::size_t n, const T* x, const T* y, T* out);
  // C[m x n] (+)= A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c,
                  bool accumulate);
  // C[k x n] += A[m x k]^T * G[m x n]
  void (*gemm_tn)(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* g, T* c);
  // C[m x k] += G[m x n] * B[k x n]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* g, const T* b, T* c);
};

bool backend_available(Backend b);
Backend active_backend();
// Throws ContractError if the backend is not available on this CPU.
void set_backend(Backend b);
std::string_view backend_name(Backend b);

template <class T>
const KernelTable<T>& table(Backend b);

template <class T>
const KernelTable<T>& table() {
  return table<T>(active_backend());
}

namespace detail {
template <class T>
const KernelTable<T>& scalar_table();
template <class T>
const KernelTable<T>& avx2_table();
}  // namespace detail

template <class T>
T dot(std::span<const T> x, std::span<const T> y) {
  return table<T>().dot(x.data(), y.data(), x.size());
}

template <class T>
void axpy(T a, std::span<const T> x, std::span<T> y) {
  table<T>().axpy(x.size(), a, x.data(), y.data());
}

template <class T>
void axpby(T a, std::span<const T> x, T b, std::span<T> y) {
  table<T>().axpby(x.size(), a, x.data(), b, y.data());
}

}  // namespace lwta::kernels
