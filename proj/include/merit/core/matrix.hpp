#pragma once
// Dense row-major matrix of doubles plus a [n x c x t] tensor used for
// batched 1-D signal data. Deliberately minimal; heavy lifting goes through
// merit::kern.

#include <cassert>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "merit/kernels/kernels.hpp"

namespace merit {

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> d;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), d(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return d[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return d[r * cols + c]; }
  double* row(std::size_t r) { return d.data() + r * cols; }
  const double* row(std::size_t r) const { return d.data() + r * cols; }
  std::size_t size() const { return d.size(); }
  double* data() { return d.data(); }
  const double* data() const { return d.data(); }

  Matrix transposed() const {
    Matrix t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }
};

// C = alpha*op(A)*op(B) + beta*C
inline void matmul(bool ta, bool tb, double alpha, const Matrix& a, const Matrix& b,
                   double beta, Matrix& c) {
  std::size_t m = ta ? a.cols : a.rows;
  std::size_t k = ta ? a.rows : a.cols;
  std::size_t kb = tb ? b.cols : b.rows;
  std::size_t n = tb ? b.rows : b.cols;
  if (k != kb) throw std::invalid_argument("matmul: inner dimension mismatch");
  if (c.rows != m || c.cols != n) c = Matrix(m, n);
  kern::gemm(ta, tb, m, n, k, alpha, a.data(), a.cols, b.data(), b.cols, beta, c.data(), c.cols);
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c;
  matmul(false, false, 1.0, a, b, 0.0, c);
  return c;
}

// Batched channel-major signal block: index (n, c, t).
struct Tensor3 {
  std::size_t n = 0, c = 0, t = 0;
  std::vector<double> d;

  Tensor3() = default;
  Tensor3(std::size_t n_, std::size_t c_, std::size_t t_, double fill = 0.0)
      : n(n_), c(c_), t(t_), d(n_ * c_ * t_, fill) {}

  double& operator()(std::size_t i, std::size_t j, std::size_t k) { return d[(i * c + j) * t + k]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const { return d[(i * c + j) * t + k]; }
  double* chan(std::size_t i, std::size_t j) { return d.data() + (i * c + j) * t; }
  const double* chan(std::size_t i, std::size_t j) const { return d.data() + (i * c + j) * t; }
  std::size_t size() const { return d.size(); }
};

}  // namespace merit
