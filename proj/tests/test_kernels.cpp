#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "merit/core/rng.hpp"
#include "merit/kernels/kernels.hpp"

using namespace merit;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Plain triple-loop gemm used as the oracle.
void naive_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
                const std::vector<double>& a, std::size_t lda, const std::vector<double>& b,
                std::size_t ldb, double beta, std::vector<double>& c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        double av = ta ? a[p * lda + i] : a[i * lda + p];
        double bv = tb ? b[j * ldb + p] : b[p * ldb + j];
        acc += av * bv;
      }
      c[i * ldc + j] = alpha * acc + beta * c[i * ldc + j];
    }
}

}  // namespace

TEST_CASE("scalar lane matches simple formulas") {
  const auto& t = kern::scalar_table;
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(t.dot(a.data(), b.data(), 3) == doctest::Approx(32.0));
  CHECK(t.sum(a.data(), 3) == doctest::Approx(6.0));
  CHECK(t.sumsq(a.data(), 3) == doctest::Approx(14.0));

  std::vector<double> y{1, 1, 1};
  t.axpy(2.0, a.data(), y.data(), 3);
  CHECK(y[0] == doctest::Approx(3.0));
  CHECK(y[2] == doctest::Approx(7.0));

  std::vector<double> o(3);
  t.vadd(a.data(), b.data(), o.data(), 3);
  CHECK(o[1] == doctest::Approx(7.0));
  t.vmul(a.data(), b.data(), o.data(), 3);
  CHECK(o[2] == doctest::Approx(18.0));

  std::vector<double> s{2, 4};
  t.scale(0.5, s.data(), 2);
  CHECK(s[0] == doctest::Approx(1.0));
}

TEST_CASE("active lane equals scalar lane on random data") {
  // Covers the AVX2 lane when the CPU supports it; degenerates to a
  // self-check otherwise.
  const auto& ref = kern::scalar_table;
  const auto& act = kern::active();
  Rng rng(123);
  for (std::size_t n : {1u, 2u, 3u, 4u, 7u, 8u, 9u, 31u, 64u, 1000u, 1023u}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    CHECK(act.dot(a.data(), b.data(), n) ==
          doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-12));
    CHECK(act.sum(a.data(), n) == doctest::Approx(ref.sum(a.data(), n)).epsilon(1e-12));
    CHECK(act.sumsq(a.data(), n) == doctest::Approx(ref.sumsq(a.data(), n)).epsilon(1e-12));

    auto y1 = b, y2 = b;
    ref.axpy(1.7, a.data(), y1.data(), n);
    act.axpy(1.7, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

    auto s1 = a, s2 = a;
    ref.scale(-0.3, s1.data(), n);
    act.scale(-0.3, s2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-14));

    std::vector<double> o1(n), o2(n);
    ref.vadd(a.data(), b.data(), o1.data(), n);
    act.vadd(a.data(), b.data(), o2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(1e-14));
    ref.vmul(a.data(), b.data(), o1.data(), n);
    act.vmul(a.data(), b.data(), o2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(1e-14));
  }
}

TEST_CASE("gemm matches the naive triple loop for all transpose modes") {
  Rng rng(7);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      std::size_t m = 5, n = 7, k = 4;
      std::size_t lda = ta ? m : k, ldb = tb ? k : n;
      auto a = random_vec(rng, ta ? k * m : m * k);
      auto b = random_vec(rng, tb ? n * k : k * n);
      auto c0 = random_vec(rng, m * n);
      auto c1 = c0;

      kern::gemm(ta, tb, m, n, k, 1.3, a.data(), lda, b.data(), ldb, 0.7, c0.data(), n);
      naive_gemm(ta, tb, m, n, k, 1.3, a, lda, b, ldb, 0.7, c1, n);
      for (std::size_t i = 0; i < m * n; ++i)
        CHECK(c0[i] == doctest::Approx(c1[i]).epsilon(1e-12));
    }
}

TEST_CASE("active lane reports a known name") {
  CHECK((kern::active_name() == "scalar" || kern::active_name() == "avx2"));
}
