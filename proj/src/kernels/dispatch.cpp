#include <cstdlib>
#include <string>

#include "merit/kernels/kernels.hpp"

namespace merit::kern {
namespace {

struct Selection {
  const KernelTable* table;
  std::string name;
};

Selection select() {
  const char* force = std::getenv("MERIT_SIMD");
  std::string want = force ? force : "";
#ifdef MERIT_BUILD_AVX2
  bool cpu_ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  if (want == "avx2") {
    if (cpu_ok) return {&avx2_table, "avx2"};
    return {&scalar_table, "scalar"};
  }
  if (want.empty() && cpu_ok) return {&avx2_table, "avx2"};
#endif
  return {&scalar_table, "scalar"};
}

const Selection& selection() {
  static const Selection s = select();
  return s;
}

}  // namespace

const KernelTable& active() { return *selection().table; }
const std::string& active_name() { return selection().name; }

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda,
          const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc) {
  const KernelTable& t = active();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    if (beta == 0.0) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    } else if (beta != 1.0) {
      t.scale(beta, crow, n);
    }
  }
  if (alpha == 0.0 || k == 0) return;

  if (!trans_b) {
    // C_i += alpha * A(i,p) * B_p  — axpy over rows of B.
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * ldc;
      for (std::size_t p = 0; p < k; ++p) {
        double aip = trans_a ? a[p * lda + i] : a[i * lda + p];
        if (aip != 0.0) t.axpy(alpha * aip, b + p * ldb, crow, n);
      }
    }
  } else if (!trans_a) {
    // C(i,j) += alpha * dot(A_i, B_j) — both contiguous along k.
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a + i * lda;
      double* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j)
        crow[j] += alpha * t.dot(arow, b + j * ldb, k);
    }
  } else {
    // A^T * B^T: fall back to strided scalar loops (rare, small cases only).
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += a[p * lda + i] * b[j * ldb + p];
        c[i * ldc + j] += alpha * acc;
      }
  }
}

}  // namespace merit::kern
