#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hot {

// Row-major dense matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
  std::size_t size() const { return v.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  static Matrix identity(int n);
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a b^T
Matrix transpose(const Matrix& a);
void add_inplace(Matrix& a, const Matrix& b, double s = 1.0);
double max_abs_diff(const Matrix& a, const Matrix& b);

// out[r] += a_row * b for a single row vector of length b.rows.
void axpy_row_matmul(const double* a_row, const Matrix& b, double* out);

}  // namespace hot
