#include "hot/mpnn.hpp"

#include <stdexcept>

namespace hot {

std::vector<double> AffineMap::apply(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != W.cols) throw std::invalid_argument("AffineMap: input width mismatch");
  std::vector<double> y(W.rows);
  for (int r = 0; r < W.rows; ++r) {
    double s = b.v.empty() ? 0.0 : b.v[r];
    for (int c = 0; c < W.cols; ++c) s += W(r, c) * x[c];
    y[r] = s;
  }
  return y;
}

AffineMap AffineMap::random(int out, int in, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0 / std::max(1, in));
  AffineMap m{Matrix(out, in), Matrix(1, out)};
  for (auto& x : m.W.v) x = nd(rng);
  for (auto& x : m.b.v) x = nd(rng);
  return m;
}

MPNNOracle MPNNOracle::affine(int d_v, int d_e, int d_m, int d, AffineMap m, AffineMap u) {
  if (m.in() != 2 * d_v + d_e || m.out() != d_m || u.in() != d_v + d_m || u.out() != d)
    throw std::invalid_argument("MPNNOracle: affine map dimensions inconsistent");
  MPNNOracle o;
  o.d_v = d_v;
  o.d_e = d_e;
  o.d_m = d_m;
  o.d = d;
  o.M = [m](const std::vector<double>& x) { return m.apply(x); };
  o.U = [u](const std::vector<double>& x) { return u.apply(x); };
  o.M_affine = std::move(m);
  o.U_affine = std::move(u);
  return o;
}

Matrix mpnn_oracle_forward(const MPNNOracle& o, const Matrix& x, const Graph& g) {
  if (x.rows != g.n || x.cols != o.d_v || g.edge_features.cols != o.d_e)
    throw std::invalid_argument("mpnn_oracle_forward: dimension mismatch");
  Matrix msg(g.n, o.d_m);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    auto [i, j] = g.edges[e];
    std::vector<double> in(x.row(j), x.row(j) + o.d_v);
    in.insert(in.end(), x.row(i), x.row(i) + o.d_v);
    in.insert(in.end(), g.edge_features.row(static_cast<int>(e)), g.edge_features.row(static_cast<int>(e)) + o.d_e);
    auto m = o.M(in);
    for (int c = 0; c < o.d_m; ++c) msg(j, c) += m[c];
  }
  Matrix h(g.n, o.d);
  for (int j = 0; j < g.n; ++j) {
    std::vector<double> in(x.row(j), x.row(j) + o.d_v);
    in.insert(in.end(), msg.row(j), msg.row(j) + o.d_m);
    auto u = o.U(in);
    std::copy(u.begin(), u.end(), h.row(j));
  }
  return h;
}

}  // namespace hot
