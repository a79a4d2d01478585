#pragma once
// Data-parallel inner loops used by the DSP and network code.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active set is chosen once at startup from CPUID;
// set MERIT_SIMD=scalar (or avx2) to force a lane. The two lanes are
// equivalence-tested against each other in tests/test_kernels.cpp.

#include <cstddef>
#include <string>

namespace merit::kern {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);          // y += a*x
  void (*scale)(double, double*, std::size_t);                        // x *= a
  void (*vadd)(const double*, const double*, double*, std::size_t);   // o = a+b
  void (*vmul)(const double*, const double*, double*, std::size_t);   // o = a*b
  double (*sum)(const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
};

// Scalar reference lane (always available).
extern const KernelTable scalar_table;
#ifdef MERIT_BUILD_AVX2
extern const KernelTable avx2_table;
#endif

// Active lane; resolved on first use.
const KernelTable& active();
// Name of the active lane ("scalar" or "avx2").
const std::string& active_name();

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
inline void scale(double a, double* x, std::size_t n) { active().scale(a, x, n); }
inline void vadd(const double* a, const double* b, double* o, std::size_t n) { active().vadd(a, b, o, n); }
inline void vmul(const double* a, const double* b, double* o, std::size_t n) { active().vmul(a, b, o, n); }
inline double sum(const double* a, std::size_t n) { return active().sum(a, n); }
inline double sumsq(const double* a, std::size_t n) { return active().sumsq(a, n); }

// C[MxN] (+)= A[MxK] * B[KxN], row-major, optional transposes on logical A/B.
// Composed from the dot/axpy kernels so it rides the active lane.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda,
          const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc);

}  // namespace merit::kern
