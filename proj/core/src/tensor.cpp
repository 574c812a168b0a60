#include "hot/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hot {

std::uint64_t ipow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int t = 0; t < exp; ++t) r *= base;
  return r;
}

DenseTensor::DenseTensor(int n_, int k_, int d_) : n(n_), k(k_), d(d_) {
  if (n < 0 || k < 0 || d < 0) throw std::invalid_argument("DenseTensor: negative shape");
  values.assign(positions() * d, 0.0);
}

std::size_t DenseTensor::flat(std::span<const int> idx) const {
  std::size_t f = 0;
  for (int t = 0; t < k; ++t) f = f * n + idx[t];
  return f;
}

void DenseTensor::unflat(std::size_t f, int* idx) const {
  for (int t = k - 1; t >= 0; --t) {
    idx[t] = static_cast<int>(f % n);
    f /= n;
  }
}

DenseTensor DenseTensor::random(int n, int k, int d, std::mt19937_64& rng, double scale) {
  DenseTensor a(n, k, d);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& x : a.values) x = u(rng);
  return a;
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  if (a.n != b.n || a.k != b.k || a.d != b.d) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

std::uint64_t EdgeSet::key(const int* t) const {
  std::uint64_t c = 0;
  for (int s = k - 1; s >= 0; --s) c = c * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(t[s]);
  return c;
}

EdgeSet EdgeSet::from_tuples(int n, int k, std::vector<int> flat) {
  if (k == 0) throw std::invalid_argument("EdgeSet::from_tuples: use scalar_edges for k = 0");
  if (flat.size() % k) throw std::invalid_argument("EdgeSet::from_tuples: ragged tuples");
  for (int v : flat)
    if (v < 0 || v >= n) throw std::out_of_range("EdgeSet: index out of range");
  std::size_t m = flat.size() / k;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(flat.begin() + a * k, flat.begin() + a * k + k, flat.begin() + b * k,
                                        flat.begin() + b * k + k);
  };
  std::sort(order.begin(), order.end(), less);
  EdgeSet e(n, k);
  e.idx.reserve(flat.size());
  for (std::size_t r = 0; r < m; ++r) {
    std::size_t o = order[r];
    if (r > 0 && std::equal(flat.begin() + o * k, flat.begin() + o * k + k, flat.begin() + order[r - 1] * k)) continue;
    e.idx.insert(e.idx.end(), flat.begin() + o * k, flat.begin() + o * k + k);
  }
  return e;
}

EdgeSet EdgeSet::full_grid(int n, int k) {
  if (k == 0) return scalar_edges(n);
  EdgeSet e(n, k);
  std::size_t total = ipow(n, k);
  e.idx.resize(total * k);
  for (std::size_t f = 0; f < total; ++f) {
    std::size_t g = f;
    for (int t = k - 1; t >= 0; --t) {
      e.idx[f * k + t] = static_cast<int>(g % n);
      g /= n;
    }
  }
  return e;
}

EdgeSet EdgeSet::distinct_grid(int n, int k) {
  EdgeSet full = full_grid(n, k);
  if (k == 0) return full;
  EdgeSet e(n, k);
  for (int r = 0; r < full.size(); ++r) {
    const int* t = full.tuple(r);
    bool ok = true;
    for (int a = 0; a < k && ok; ++a)
      for (int b = a + 1; b < k && ok; ++b) ok = t[a] != t[b];
    if (ok) e.idx.insert(e.idx.end(), t, t + k);
  }
  return e;
}

EdgeIndex::EdgeIndex(const EdgeSet& e) : e_(&e) {
  map_.reserve(e.size() * 2 + 1);
  for (int r = 0; r < e.size(); ++r) map_.emplace(e.key(e.tuple(r)), r);
}

int EdgeIndex::find(const int* t) const {
  if (e_->k == 0) return e_->rows0 > 0 ? 0 : -1;
  auto it = map_.find(e_->key(t));
  return it == map_.end() ? -1 : it->second;
}

void SparseTensor::validate() const {
  if (values.rows != m()) throw std::invalid_argument("SparseTensor: value rows != edge count");
  for (int v : edges.idx)
    if (v < 0 || v >= edges.n) throw std::out_of_range("SparseTensor: edge index out of range");
}

NodePermutation::NodePermutation(std::vector<int> p) : perm(std::move(p)), inv(perm.size(), -1) {
  for (std::size_t i = 0; i < perm.size(); ++i) {
    int v = perm[i];
    if (v < 0 || v >= static_cast<int>(perm.size()) || inv[v] >= 0)
      throw std::invalid_argument("NodePermutation: not a bijection");
    inv[v] = static_cast<int>(i);
  }
}

NodePermutation NodePermutation::identity(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  return NodePermutation(std::move(p));
}

NodePermutation NodePermutation::random(int n, std::mt19937_64& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return NodePermutation(std::move(p));
}

DenseTensor apply_permutation(const DenseTensor& a, const NodePermutation& p) {
  if (p.n() != a.n) throw std::invalid_argument("apply_permutation: n mismatch");
  DenseTensor out(a.n, a.k, a.d);
  std::vector<int> idx(a.k), src(a.k);
  for (std::size_t f = 0; f < a.positions(); ++f) {
    a.unflat(f, idx.data());
    for (int t = 0; t < a.k; ++t) src[t] = p.inv[idx[t]];
    std::copy_n(a.at(src), a.d, out.at(f));
  }
  return out;
}

EdgeSet apply_permutation(const EdgeSet& e, const NodePermutation& p) {
  if (p.n() != e.n) throw std::invalid_argument("apply_permutation: n mismatch");
  if (e.k == 0) return e;
  std::vector<int> flat(e.idx.size());
  for (std::size_t t = 0; t < flat.size(); ++t) flat[t] = p.perm[e.idx[t]];
  return EdgeSet::from_tuples(e.n, e.k, std::move(flat));
}

SparseTensor apply_permutation(const SparseTensor& s, const NodePermutation& p) {
  SparseTensor out;
  out.edges = apply_permutation(s.edges, p);
  out.values = Matrix(s.m(), s.d());
  if (s.k() == 0) {
    out.values = s.values;
    return out;
  }
  EdgeIndex ix(out.edges);
  std::vector<int> t(s.k());
  for (int r = 0; r < s.m(); ++r) {
    for (int c = 0; c < s.k(); ++c) t[c] = p.perm[s.edges.tuple(r)[c]];
    std::copy_n(s.values.row(r), s.d(), out.values.row(ix.find(t.data())));
  }
  return out;
}

DenseTensor densify(const SparseTensor& s) {
  s.validate();
  DenseTensor a(s.n(), s.k(), s.d());
  for (int r = 0; r < s.m(); ++r)
    std::copy_n(s.values.row(r), s.d(), a.at(std::span<const int>(s.edges.tuple(r), s.k())));
  return a;
}

SparseTensor sparsify(const DenseTensor& a, const EdgeSet& e) {
  if (e.n != a.n || e.k != a.k) throw std::invalid_argument("sparsify: shape mismatch");
  for (int v : e.idx)
    if (v < 0 || v >= a.n) throw std::out_of_range("sparsify: edge out of range");
  SparseTensor s;
  s.edges = e;
  s.values = Matrix(e.size(), a.d);
  for (int r = 0; r < e.size(); ++r)
    std::copy_n(a.at(std::span<const int>(e.tuple(r), e.k)), a.d, s.values.row(r));
  return s;
}

EdgeSet project_edges(const EdgeSet& e, int l) {
  if (l < 1) throw std::invalid_argument("project_edges: l >= 1 required");
  if (l > e.k) throw std::invalid_argument("project_edges: l > k is unsupported");
  std::vector<int> flat;
  std::vector<int> uniq, digits(l);
  for (int r = 0; r < e.size(); ++r) {
    const int* t = e.tuple(r);
    uniq.assign(t, t + e.k);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::size_t u = uniq.size(), total = ipow(u, l);
    for (std::size_t f = 0; f < total; ++f) {
      std::size_t g = f;
      for (int c = l - 1; c >= 0; --c) {
        digits[c] = uniq[g % u];
        g /= u;
      }
      flat.insert(flat.end(), digits.begin(), digits.end());
    }
  }
  return EdgeSet::from_tuples(e.n, l, std::move(flat));
}

EdgeSet add_self_loops(const EdgeSet& e) {
  if (e.k != 2) throw std::invalid_argument("add_self_loops: order-2 edge set required");
  std::vector<int> flat = e.idx;
  for (int i = 0; i < e.n; ++i) {
    flat.push_back(i);
    flat.push_back(i);
  }
  return EdgeSet::from_tuples(e.n, 2, std::move(flat));
}

EdgeSet scalar_edges(int n) {
  EdgeSet e(n, 0);
  e.rows0 = 1;
  return e;
}

EdgeSet output_edges(const EdgeSet& e, int l) {
  if (l == e.k) return e;
  if (l == 0) return scalar_edges(e.n);
  return project_edges(e, l);
}

Graph make_undirected(int n, const std::vector<std::array<int, 2>>& undirected, int d_e) {
  Graph g;
  g.n = n;
  for (auto [a, b] : undirected) {
    g.edges.push_back({a, b});
    g.edges.push_back({b, a});
  }
  g.edge_features = Matrix(static_cast<int>(g.edges.size()), d_e, 1.0);
  return g;
}

namespace {

void check_graph(const Graph& g) {
  if (g.edge_features.rows != static_cast<int>(g.edges.size()))
    throw std::invalid_argument("graph: edge feature rows != edge count");
  for (auto [a, b] : g.edges) {
    if (a < 0 || b < 0 || a >= g.n || b >= g.n) throw std::out_of_range("graph: dangling edge endpoint");
    if (a == b) throw std::invalid_argument("graph: explicit self-loop in edge list");
  }
}

}  // namespace

SparseTensor encode_graph(const Matrix& x, const Graph& g) {
  check_graph(g);
  if (x.rows != g.n) throw std::invalid_argument("encode_graph: node feature rows != n");
  int dv = x.cols, de = g.edge_features.cols;
  std::vector<int> flat;
  for (auto [a, b] : g.edges) flat.insert(flat.end(), {a, b});
  SparseTensor s;
  s.edges = add_self_loops(EdgeSet::from_tuples(g.n, 2, std::move(flat)));
  if (s.m() != g.n + static_cast<int>(g.edges.size())) throw std::invalid_argument("encode_graph: duplicate edges");
  s.values = Matrix(s.m(), dv + de);
  EdgeIndex ix(s.edges);
  for (int i = 0; i < g.n; ++i) {
    int t[2] = {i, i};
    std::copy_n(x.row(i), dv, s.values.row(ix.find(t)));
  }
  for (std::size_t r = 0; r < g.edges.size(); ++r)
    std::copy_n(g.edge_features.row(static_cast<int>(r)), de, s.values.row(ix.find(g.edges[r].data())) + dv);
  return s;
}

SparseTensor mpnn_pack(const Matrix& x, const Graph& g, bool self_loops) {
  check_graph(g);
  if (x.rows != g.n) throw std::invalid_argument("mpnn_pack: channel mismatch (node rows != n)");
  int dv = x.cols, de = g.edge_features.cols;
  std::vector<int> flat;
  for (auto [a, b] : g.edges) flat.insert(flat.end(), {a, b});
  SparseTensor s;
  s.edges = EdgeSet::from_tuples(g.n, 2, std::move(flat));
  if (self_loops) s.edges = add_self_loops(s.edges);
  s.values = Matrix(s.m(), 2 * dv + de);
  EdgeIndex ix(s.edges);
  for (int r = 0; r < s.m(); ++r) {
    const int* t = s.edges.tuple(r);
    std::copy_n(x.row(t[1]), dv, s.values.row(r));
    std::copy_n(x.row(t[0]), dv, s.values.row(r) + dv);
  }
  for (std::size_t r = 0; r < g.edges.size(); ++r)
    std::copy_n(g.edge_features.row(static_cast<int>(r)), de, s.values.row(ix.find(g.edges[r].data())) + 2 * dv);
  return s;
}

SparseTensor pad_channels(const SparseTensor& s, int extra) {
  SparseTensor o;
  o.edges = s.edges;
  o.values = Matrix(s.m(), s.d() + extra);
  for (int r = 0; r < s.m(); ++r) std::copy_n(s.values.row(r), s.d(), o.values.row(r));
  return o;
}

}  // namespace hot
