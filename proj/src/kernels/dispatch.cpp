#include <atomic>
#include <cstdlib>
#include <string>

#include "lwta/error.hpp"
#include "lwta/kernels.hpp"

namespace lwta::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(LWTA_HAVE_AVX2_KERNELS) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("LWTA_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && cpu_has_avx2()) return Backend::avx2;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

}  // namespace

bool backend_available(Backend b) {
  return b == Backend::scalar || cpu_has_avx2();
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw ContractError("kernel backend " + std::string(backend_name(b)) +
                        " is not available on this CPU");
  }
  current().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

template <class T>
const KernelTable<T>& table(Backend b) {
#if defined(LWTA_HAVE_AVX2_KERNELS)
  if (b == Backend::avx2) return detail::avx2_table<T>();
#endif
  (void)b;
  return detail::scalar_table<T>();
}

template const KernelTable<float>& table<float>(Backend);
template const KernelTable<double>& table<double>(Backend);

}  // namespace lwta::kernels
