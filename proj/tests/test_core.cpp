#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "merit/core/container.hpp"
#include "merit/core/fft.hpp"
#include "merit/core/matrix.hpp"
#include "merit/core/rng.hpp"

using namespace merit;
namespace fs = std::filesystem;

namespace {
constexpr double kPi = 3.14159265358979323846;

std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
  std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      acc += x[j] * std::exp(std::complex<double>(0, -2.0 * kPi * double(k) * double(j) / double(n)));
    out[k] = acc;
  }
  return out;
}
}  // namespace

TEST_CASE("fft matches a naive DFT") {
  Rng rng(42);
  for (std::size_t n : {2u, 4u, 8u, 64u, 256u}) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {rng.normal(), rng.normal()};
    auto ref = naive_dft(x);
    auto got = x;
    fft_inplace(got);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(got[k].real() == doctest::Approx(ref[k].real()).epsilon(1e-9).scale(1.0));
      CHECK(got[k].imag() == doctest::Approx(ref[k].imag()).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("rfft of a pure tone peaks at the tone bin") {
  std::size_t n = 128;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2.0 * kPi * 5.0 * double(i) / double(n));
  auto spec = rfft_onesided(x, {});
  std::size_t peak = 0;
  for (std::size_t k = 1; k < spec.size(); ++k)
    if (std::abs(spec[k]) > std::abs(spec[peak])) peak = k;
  CHECK(peak == 5);
}

TEST_CASE("hann window endpoints and symmetry") {
  auto w = hann_window(64);
  REQUIRE(w.size() == 64);
  CHECK(w[0] == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  // periodic (DFT-even) variant: symmetric about n/2
  for (std::size_t i = 1; i < 32; ++i) CHECK(w[i] == doctest::Approx(w[64 - i]).epsilon(1e-12));
  CHECK(w[32] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rng is deterministic and forks are independent") {
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
  Rng c(99);
  Rng f1 = c.fork(1), f2 = c.fork(2);
  CHECK(f1.normal() != f2.normal());
}

TEST_CASE("matrix matmul with transposes") {
  Matrix a(2, 3), b(2, 3);
  double v = 1;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) a(i, j) = v, b(i, j) = 2 * v, v += 1;
  Matrix c;
  matmul(false, true, 1.0, a, b, 0.0, c);  // [2x3]*[3x2]
  REQUIRE(c.rows == 2);
  REQUIRE(c.cols == 2);
  // row 0 of a = [1,2,3]; row 0 of b = [2,4,6] -> dot 28
  CHECK(c(0, 0) == doctest::Approx(28.0));
  CHECK(c(1, 1) == doctest::Approx(2.0 * (4 * 4 + 5 * 5 + 6 * 6)));
}

TEST_CASE("archive round-trips values, shapes and is byte-stable") {
  Archive ar;
  ar.put_f64("w", {2, 3}, {1, 2, 3, 4, 5, 6});
  ar.put_i64("idx", {4}, {7, -1, 0, 42});
  ar.put_scalar("alpha", 9.5);

  std::string p1 = (fs::temp_directory_path() / "merit_ar_test1.bin").string();
  std::string p2 = (fs::temp_directory_path() / "merit_ar_test2.bin").string();
  ar.save(p1);
  ar.save(p2);

  Archive rd = Archive::load(p1);
  CHECK(rd.has("w"));
  CHECK_FALSE(rd.has("nope"));
  CHECK(rd.shape("w") == std::vector<std::size_t>{2, 3});
  CHECK(rd.f64("w")[5] == doctest::Approx(6.0));
  CHECK(rd.i64("idx")[3] == 42);
  CHECK(rd.scalar("alpha") == doctest::Approx(9.5));

  // Same content -> same bytes (determinism backbone for checkpoints).
  CHECK(read_text(p1) == read_text(p2));

  CHECK_THROWS(rd.f64("missing"));
  Archive bad;
  CHECK_THROWS(bad.put_f64("x", {2, 2}, {1.0, 2.0, 3.0}));  // shape/data mismatch

  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("atomic_write_text round trip") {
  std::string p = (fs::temp_directory_path() / "merit_txt_test.txt").string();
  atomic_write_text(p, "hello\n");
  CHECK(read_text(p) == "hello\n");
  fs::remove(p);
}
