#pragma once

// Brute-force references used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hot/attention.hpp"
#include "hot/equivariant_linear.hpp"
#include "hot/mpnn.hpp"
#include "hot/tensor.hpp"

namespace oracle {

using hot::DenseTensor;
using hot::Matrix;

inline std::vector<int> rgs(const std::vector<int>& idx) {
  std::vector<int> out(idx.size());
  std::vector<int> seen;
  for (std::size_t t = 0; t < idx.size(); ++t) {
    auto it = std::find(seen.begin(), seen.end(), idx[t]);
    if (it == seen.end()) {
      out[t] = static_cast<int>(seen.size());
      seen.push_back(idx[t]);
    } else {
      out[t] = static_cast<int>(it - seen.begin());
    }
  }
  return out;
}

inline int blocks(const std::vector<int>& idx) {
  auto r = rgs(idx);
  return r.empty() ? 0 : *std::max_element(r.begin(), r.end()) + 1;
}

// All multi-indices of [n]^k, first position most significant.
inline std::vector<std::vector<int>> grid(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(k, 0);
  for (;;) {
    out.push_back(cur);
    int t = k - 1;
    while (t >= 0 && ++cur[t] == n) cur[t--] = 0;
    if (t < 0) break;
  }
  return out;
}

inline std::size_t flat(const std::vector<int>& idx, int n) {
  std::size_t f = 0;
  for (int v : idx) f = f * n + v;
  return f;
}

inline std::vector<int> cat(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> r = a;
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

// Values of each block at its first occurrence.
inline std::vector<int> compact(const std::vector<int>& idx) {
  std::vector<int> out;
  for (std::size_t t = 0; t < idx.size(); ++t)
    if (std::find(idx.begin(), idx.begin() + t, idx[t]) == idx.begin() + t) out.push_back(idx[t]);
  return out;
}

inline int bias_row_of(const std::vector<int>& j) {
  if (j.empty()) return 0;
  auto lam = hot::enumerate_classes(static_cast<int>(j.size()));
  auto r = rgs(j);
  for (std::size_t b = 0; b < lam.size(); ++b)
    if (lam[b].rgs == r) return static_cast<int>(b);
  return -1;
}

inline int class_of(const hot::LinearEquivariant& L, const std::vector<int>& ij) {
  auto r = rgs(ij);
  for (std::size_t c = 0; c < L.classes.size(); ++c)
    if (L.classes[c].part.rgs == r) return static_cast<int>(c);
  return -1;
}

// Every (i, j) pair, its class weight, plus the bias of j's pattern.
inline DenseTensor linear(const hot::LinearEquivariant& L, const DenseTensor& a) {
  DenseTensor out(a.n, L.l, L.d_out);
  auto ins = grid(a.n, L.k);
  for (auto& j : grid(a.n, L.l)) {
    double* o = out.values.data() + flat(j, a.n) * L.d_out;
    int b = bias_row_of(j);
    for (int c = 0; c < L.d_out; ++c) o[c] = L.bias(b, c);
    for (auto& i : ins) {
      int c = class_of(L, cat(i, j));
      if (c < 0) continue;
      const double* x = a.values.data() + flat(i, a.n) * a.d;
      for (int r = 0; r < L.d_in; ++r)
        for (int s = 0; s < L.d_out; ++s) o[s] += x[r] * L.weights[c](r, s);
    }
  }
  return out;
}

// out[p(i_1)..p(i_k)] = a[i_1..i_k]
inline DenseTensor permute(const DenseTensor& a, const std::vector<int>& p) {
  DenseTensor out(a.n, a.k, a.d);
  for (auto& i : grid(a.n, a.k)) {
    std::vector<int> pi(i.size());
    for (std::size_t t = 0; t < i.size(); ++t) pi[t] = p[i[t]];
    std::copy_n(a.values.data() + flat(i, a.n) * a.d, a.d, out.values.data() + flat(pi, a.n) * a.d);
  }
  return out;
}

inline std::vector<int> random_perm(int n, std::mt19937_64& rng) {
  std::vector<int> p(n);
  for (int t = 0; t < n; ++t) p[t] = t;
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

inline double max_diff(const DenseTensor& a, const DenseTensor& b) {
  if (a.n != b.n || a.k != b.k || a.d != b.d) return INFINITY;
  double m = 0;
  for (std::size_t t = 0; t < a.values.size(); ++t) m = std::max(m, std::abs(a.values[t] - b.values[t]));
  return m;
}

inline DenseTensor random_dense(int n, int k, int d, std::mt19937_64& rng) {
  DenseTensor a(n, k, d);
  std::normal_distribution<double> nd;
  for (auto& v : a.values) v = nd(rng);
  return a;
}

inline Matrix random_matrix(int r, int c, std::mt19937_64& rng, double sd = 1.0) {
  Matrix m(r, c);
  std::normal_distribution<double> nd(0.0, sd);
  for (auto& v : m.v) v = nd(rng);
  return m;
}

inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0;
      for (int t = 0; t < a.cols; ++t) s += a(i, t) * b(t, j);
      c(i, j) = s;
    }
  return c;
}

enum class Weighting { Softmax, PerformerCoupled, Unit };

inline std::vector<double> performer(const std::vector<double>& x, const Matrix& w, double prescale) {
  std::vector<double> out(w.rows);
  double sq = 0;
  for (double v : x) sq += v * v * prescale * prescale;
  for (int q = 0; q < w.rows; ++q) {
    double s = 0;
    for (int c = 0; c < w.cols; ++c) s += w(q, c) * x[c] * prescale;
    out[q] = std::exp(s - 0.5 * sq) / std::sqrt(static_cast<double>(w.rows));
  }
  return out;
}

// Attention summed over heads and classes, one (i, j) pair at a time.
// present (by flat index) restricts the keys to stored entries.
inline DenseTensor attention(const DenseTensor& a, const hot::AttentionParams& p, Weighting wt,
                             const std::vector<char>* present = nullptr) {
  int n = a.n;
  DenseTensor out(n, p.l, p.d_out);
  auto ins = grid(n, p.k);
  double scale = 1.0 / std::sqrt(static_cast<double>(p.d_H));
  double prescale = std::pow(static_cast<double>(p.d_H), -0.25);
  for (int h = 0; h < p.H; ++h)
    for (std::size_t c = 0; c < p.classes.size(); ++c) {
      const auto& mu = p.classes[c];
      const auto& b = p.at(h, static_cast<int>(c));
      DenseTensor qc = linear(b.query, a), kc = linear(b.key, a);
      Matrix wvo = mat_mul(b.w_v, b.w_o);
      for (auto& j : grid(n, p.l)) {
        std::vector<std::vector<int>> members;
        for (auto& i : ins)
          if (rgs(cat(i, j)) == mu.part.rgs && (!present || (*present)[flat(i, n)])) members.push_back(i);
        if (members.empty()) continue;
        const double* q = qc.values.data() + flat(compact(j), n) * qc.d;
        std::vector<double> w(members.size());
        for (std::size_t t = 0; t < members.size(); ++t) {
          const double* kk = kc.values.data() + flat(compact(members[t]), n) * kc.d;
          if (wt == Weighting::Unit) {
            w[t] = 1.0;
          } else if (wt == Weighting::Softmax) {
            double s = 0;
            for (int e = 0; e < p.d_H; ++e) s += q[e] * kk[e];
            w[t] = scale * s;
          } else {
            auto fq = performer(std::vector<double>(q, q + p.d_H), p.kernel.projection, prescale);
            auto fk = performer(std::vector<double>(kk, kk + p.d_H), p.kernel.projection, prescale);
            double s = 0;
            for (std::size_t e = 0; e < fq.size(); ++e) s += fq[e] * fk[e];
            w[t] = s;
          }
        }
        if (wt == Weighting::Softmax) {
          double mx = *std::max_element(w.begin(), w.end()), z = 0;
          for (auto& v : w) z += v = std::exp(v - mx);
          for (auto& v : w) v /= z;
        } else if (wt == Weighting::PerformerCoupled) {
          double z = 0;
          for (double v : w) z += v;
          for (auto& v : w) v /= z;
        }
        double* o = out.values.data() + flat(j, n) * p.d_out;
        for (std::size_t t = 0; t < members.size(); ++t) {
          const double* x = a.values.data() + flat(members[t], n) * a.d;
          for (int r = 0; r < p.d_in; ++r)
            for (int s = 0; s < p.d_out; ++s) o[s] += w[t] * x[r] * wvo(r, s);
        }
      }
    }
  return out;
}

// H_j = U(X_j, sum_{(i,j) in E} M(X_j, X_i, E_ij)) for affine M, U.
inline Matrix mpnn(const Matrix& x, const hot::Graph& g, const hot::AffineMap& M, const hot::AffineMap& U) {
  int n = x.rows, dv = x.cols, de = g.edge_features.cols;
  Matrix msg(n, M.out());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    int i = g.edges[e][0], j = g.edges[e][1];
    std::vector<double> in;
    for (int c = 0; c < dv; ++c) in.push_back(x(j, c));
    for (int c = 0; c < dv; ++c) in.push_back(x(i, c));
    for (int c = 0; c < de; ++c) in.push_back(g.edge_features(static_cast<int>(e), c));
    for (int r = 0; r < M.out(); ++r) {
      double s = M.b.v[r];
      for (std::size_t c = 0; c < in.size(); ++c) s += M.W(r, static_cast<int>(c)) * in[c];
      msg(j, r) += s;
    }
  }
  Matrix h(n, U.out());
  for (int j = 0; j < n; ++j)
    for (int r = 0; r < U.out(); ++r) {
      double s = U.b.v[r];
      for (int c = 0; c < dv; ++c) s += U.W(r, c) * x(j, c);
      for (int c = 0; c < M.out(); ++c) s += U.W(r, dv + c) * msg(j, c);
      h(j, r) = s;
    }
  return h;
}

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    double lx = std::log(x[t]), ly = std::log(y[t]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace oracle
