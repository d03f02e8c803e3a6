#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lwta/kernels.hpp"
#include "lwta/rng.hpp"

using namespace lwta;
using kernels::Backend;

namespace {

template <class T>
std::vector<T> randvec(RngStream& rng, std::size_t n) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.normal());
  return v;
}

template <class T>
T tol() {
  return std::is_same_v<T, float> ? T(2e-5) : T(1e-12);
}

// relative to the magnitude of the summed terms, not of the result
template <class T>
void expect_close(T a, T b, T scale) {
  EXPECT_LE(std::abs(a - b), tol<T>() * std::max(T(1), scale)) << a << " vs " << b;
}

class BackendGuard {
 public:
  BackendGuard() : saved_(kernels::active_backend()) {}
  ~BackendGuard() { kernels::set_backend(saved_); }

 private:
  Backend saved_;
};

}  // namespace

template <class T>
class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!kernels::backend_available(Backend::avx2)) GTEST_SKIP() << "no AVX2 on this CPU";
  }
  const kernels::KernelTable<T>& s = kernels::table<T>(Backend::scalar);
  const kernels::KernelTable<T>& v = kernels::table<T>(Backend::avx2);
};

using KernelTypes = ::testing::Types<float, double>;
TYPED_TEST_SUITE(KernelEquivalence, KernelTypes);

TYPED_TEST(KernelEquivalence, Dot) {
  using T = TypeParam;
  RngStream rng(1, 1);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 33u, 1000u}) {
    auto x = randvec<T>(rng, n), y = randvec<T>(rng, n);
    T scale = 0;
    for (std::size_t i = 0; i < n; ++i) scale += std::abs(x[i] * y[i]);
    expect_close(this->s.dot(x.data(), y.data(), n), this->v.dot(x.data(), y.data(), n), scale);
  }
}

TYPED_TEST(KernelEquivalence, AxpyAxpbyMul) {
  using T = TypeParam;
  RngStream rng(2, 1);
  for (std::size_t n : {1u, 5u, 8u, 13u, 16u, 37u, 257u}) {
    auto x = randvec<T>(rng, n), y = randvec<T>(rng, n);
    auto y1 = y, y2 = y;
    this->s.axpy(n, T(0.37), x.data(), y1.data());
    this->v.axpy(n, T(0.37), x.data(), y2.data());
    for (std::size_t i = 0; i < n; ++i) expect_close(y1[i], y2[i], T(2));

    y1 = y;
    y2 = y;
    this->s.axpby(n, T(0.25), x.data(), T(0.75), y1.data());
    this->v.axpby(n, T(0.25), x.data(), T(0.75), y2.data());
    for (std::size_t i = 0; i < n; ++i) expect_close(y1[i], y2[i], T(2));

    std::vector<T> o1(n), o2(n);
    this->s.mul(n, x.data(), y.data(), o1.data());
    this->v.mul(n, x.data(), y.data(), o2.data());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(o1[i], o2[i]);
  }
}

TYPED_TEST(KernelEquivalence, AxpbyFullStepCopiesExactly) {
  using T = TypeParam;
  RngStream rng(3, 1);
  for (std::size_t n : {1u, 8u, 19u}) {
    auto x = randvec<T>(rng, n), y = randvec<T>(rng, n);
    auto y1 = y, y2 = y;
    this->s.axpby(n, T(1), x.data(), T(0), y1.data());
    this->v.axpby(n, T(1), x.data(), T(0), y2.data());
    EXPECT_EQ(y1, x);
    EXPECT_EQ(y2, x);
  }
}

TYPED_TEST(KernelEquivalence, Gemm) {
  using T = TypeParam;
  RngStream rng(4, 1);
  const std::size_t dims[][3] = {{1, 1, 1}, {3, 5, 7}, {10, 1, 32}, {9, 16, 17}, {2, 33, 8}};
  for (const auto& d : dims) {
    const std::size_t m = d[0], k = d[1], n = d[2];
    auto a = randvec<T>(rng, m * k), b = randvec<T>(rng, k * n);
    auto c0 = randvec<T>(rng, m * n);
    for (bool acc : {false, true}) {
      auto c1 = c0, c2 = c0;
      this->s.gemm_nn(m, k, n, a.data(), b.data(), c1.data(), acc);
      this->v.gemm_nn(m, k, n, a.data(), b.data(), c2.data(), acc);
      for (std::size_t i = 0; i < m * n; ++i) expect_close(c1[i], c2[i], T(k + 2));
    }
    // A^T G with A m x k, G m x n
    auto g = randvec<T>(rng, m * n);
    std::vector<T> t1(k * n, T(0.5)), t2(k * n, T(0.5));
    this->s.gemm_tn(m, k, n, a.data(), g.data(), t1.data());
    this->v.gemm_tn(m, k, n, a.data(), g.data(), t2.data());
    for (std::size_t i = 0; i < k * n; ++i) expect_close(t1[i], t2[i], T(m + 2));
    // G B^T with G m x n, B k x n
    auto bb = randvec<T>(rng, k * n);
    std::vector<T> u1(m * k, T(-1)), u2(m * k, T(-1));
    this->s.gemm_nt(m, n, k, g.data(), bb.data(), u1.data());
    this->v.gemm_nt(m, n, k, g.data(), bb.data(), u2.data());
    for (std::size_t i = 0; i < m * k; ++i) expect_close(u1[i], u2[i], T(n + 2));
  }
}

TEST(KernelScalar, GemmMatchesNaiveLoops) {
  const auto& s = kernels::table<double>(Backend::scalar);
  const std::vector<double> a{1, 2, 3, 4, 5, 6};     // 2 x 3
  const std::vector<double> b{1, 0, 0, 1, 2, -1};    // 3 x 2
  std::vector<double> c(4, 100.0);
  s.gemm_nn(2, 3, 2, a.data(), b.data(), c.data(), false);
  EXPECT_EQ(c, (std::vector<double>{7, -1, 16, -1}));
  s.gemm_nn(2, 3, 2, a.data(), b.data(), c.data(), true);
  EXPECT_EQ(c, (std::vector<double>{14, -2, 32, -2}));
}

TEST(KernelDispatch, SetBackendAndNames) {
  BackendGuard guard;
  kernels::set_backend(Backend::scalar);
  EXPECT_EQ(kernels::active_backend(), Backend::scalar);
  EXPECT_EQ(kernels::backend_name(Backend::scalar), "scalar");
  EXPECT_EQ(kernels::backend_name(Backend::avx2), "avx2");
  if (kernels::backend_available(Backend::avx2)) {
    kernels::set_backend(Backend::avx2);
    EXPECT_EQ(kernels::active_backend(), Backend::avx2);
  }
}
