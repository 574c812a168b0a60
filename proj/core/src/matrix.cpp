#include "hot/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hot {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* cr = c.row(i);
    for (int t = 0; t < a.cols; ++t) {
      double s = ar[t];
      if (s == 0.0) continue;
      const double* br = b.row(t);
      for (int j = 0; j < b.cols; ++j) cr[j] += s * br[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: shape mismatch");
  Matrix c(a.cols, b.cols);
  for (int r = 0; r < a.rows; ++r) {
    const double* ar = a.row(r);
    const double* br = b.row(r);
    for (int i = 0; i < a.cols; ++i) {
      double s = ar[i];
      if (s == 0.0) continue;
      double* cr = c.row(i);
      for (int j = 0; j < b.cols; ++j) cr[j] += s * br[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: shape mismatch");
  Matrix c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* br = b.row(j);
      double s = 0.0;
      for (int t = 0; t < a.cols; ++t) s += ar[t] * br[t];
      c(i, j) = s;
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

void add_inplace(Matrix& a, const Matrix& b, double s) {
  if (!a.same_shape(b)) throw std::invalid_argument("add_inplace: shape mismatch");
  for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += s * b.v[i];
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

void axpy_row_matmul(const double* a_row, const Matrix& b, double* out) {
  for (int t = 0; t < b.rows; ++t) {
    double s = a_row[t];
    if (s == 0.0) continue;
    const double* br = b.row(t);
    for (int j = 0; j < b.cols; ++j) out[j] += s * br[j];
  }
}

}  // namespace hot
