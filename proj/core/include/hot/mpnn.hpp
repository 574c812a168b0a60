#pragma once

#include <functional>
#include <optional>
#include <random>

#include "hot/matrix.hpp"
#include "hot/tensor.hpp"

namespace hot {

// y = W x + b with W: out x in, b: 1 x out.
struct AffineMap {
  Matrix W;
  Matrix b;

  int in() const { return W.cols; }
  int out() const { return W.rows; }
  std::vector<double> apply(const std::vector<double>& x) const;
  static AffineMap random(int out, int in, std::mt19937_64& rng);
};

struct MPNNOracle {
  int d_v = 0;
  int d_e = 0;
  int d_m = 0;
  int d = 0;
  // M: (X_j, X_i, E_ij) -> R^{d_m};  U: (X_j, M_j) -> R^d
  std::function<std::vector<double>(const std::vector<double>&)> M;
  std::function<std::vector<double>(const std::vector<double>&)> U;
  std::optional<AffineMap> M_affine;
  std::optional<AffineMap> U_affine;

  static MPNNOracle affine(int d_v, int d_e, int d_m, int d, AffineMap m, AffineMap u);
};

// H_j = U(X_j, sum_{i in N(j)} M(X_j, X_i, E_ij)), N(j) = {i : (i, j) in E}.
Matrix mpnn_oracle_forward(const MPNNOracle& o, const Matrix& x, const Graph& g);

}  // namespace hot
