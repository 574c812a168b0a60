#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hot/matrix.hpp"

namespace hot {

std::uint64_t ipow(std::uint64_t base, int exp);

// Order-k tensor over [n]^k with d channels; index (i_1..i_k) flattens with i_1 most significant.
struct DenseTensor {
  int n = 0;
  int k = 0;
  int d = 0;
  std::vector<double> values;

  DenseTensor() = default;
  DenseTensor(int n, int k, int d);

  std::size_t positions() const { return static_cast<std::size_t>(ipow(n, k)); }
  std::size_t flat(std::span<const int> idx) const;
  void unflat(std::size_t f, int* idx) const;
  double* at(std::size_t pos) { return values.data() + pos * d; }
  const double* at(std::size_t pos) const { return values.data() + pos * d; }
  double* at(std::span<const int> idx) { return at(flat(idx)); }
  const double* at(std::span<const int> idx) const { return at(flat(idx)); }

  static DenseTensor random(int n, int k, int d, std::mt19937_64& rng, double scale = 1.0);
};

double max_abs_diff(const DenseTensor& a, const DenseTensor& b);

// Sorted, duplicate-free list of order-k multi-indices stored flat.
struct EdgeSet {
  int n = 0;
  int k = 0;
  std::vector<int> idx;  // m*k

  EdgeSet() = default;
  EdgeSet(int n, int k) : n(n), k(k) {}
  // Sorts, removes duplicates, checks range.
  static EdgeSet from_tuples(int n, int k, std::vector<int> flat);
  static EdgeSet full_grid(int n, int k);
  static EdgeSet distinct_grid(int n, int k);

  int size() const { return k == 0 ? rows0 : static_cast<int>(idx.size() / k); }
  const int* tuple(int r) const { return idx.data() + static_cast<std::size_t>(r) * k; }
  std::uint64_t key(const int* t) const;
  bool operator==(const EdgeSet&) const = default;

  // k == 0 edge sets hold zero or one empty tuple.
  int rows0 = 0;
};

// Hash lookup from multi-index to row.
class EdgeIndex {
 public:
  explicit EdgeIndex(const EdgeSet& e);
  int find(const int* t) const;

 private:
  const EdgeSet* e_;
  std::unordered_map<std::uint64_t, int> map_;
};

struct SparseTensor {
  EdgeSet edges;
  Matrix values;  // m x d

  int n() const { return edges.n; }
  int k() const { return edges.k; }
  int d() const { return values.cols; }
  int m() const { return edges.size(); }
  void validate() const;
};

struct NodePermutation {
  std::vector<int> perm;
  std::vector<int> inv;

  explicit NodePermutation(std::vector<int> p);
  static NodePermutation identity(int n);
  static NodePermutation random(int n, std::mt19937_64& rng);
  int n() const { return static_cast<int>(perm.size()); }
  NodePermutation inverse() const { return NodePermutation(inv); }
};

DenseTensor apply_permutation(const DenseTensor& a, const NodePermutation& p);
// Relabels edges by p, re-sorts rows.
SparseTensor apply_permutation(const SparseTensor& s, const NodePermutation& p);
EdgeSet apply_permutation(const EdgeSet& e, const NodePermutation& p);

DenseTensor densify(const SparseTensor& s);
SparseTensor sparsify(const DenseTensor& a, const EdgeSet& e);

EdgeSet project_edges(const EdgeSet& e, int l);
EdgeSet add_self_loops(const EdgeSet& e);
// Order-0 edge set holding the single empty tuple.
EdgeSet scalar_edges(int n);
// Output edge set for a k -> l layer over input edges e.
EdgeSet output_edges(const EdgeSet& e, int l);

struct Graph {
  int n = 0;
  std::vector<std::array<int, 2>> edges;  // directed pairs, no loops
  Matrix edge_features;                    // rows align with edges
};

// Undirected edge list -> both directions.
Graph make_undirected(int n, const std::vector<std::array<int, 2>>& undirected, int d_e = 1);

SparseTensor encode_graph(const Matrix& x, const Graph& g);
// Entry (i,j) carries (X_j, X_i, E_ij) over E plus self-loops.
SparseTensor mpnn_pack(const Matrix& x, const Graph& g, bool self_loops = true);

// Appends zero channels.
SparseTensor pad_channels(const SparseTensor& s, int extra);

// Binary snapshot: "HOTT", u32 version, u32 header length, JSON header, edges (i32), values (f64).
void save_snapshot(std::ostream& os, const SparseTensor& s);
void save_snapshot(std::ostream& os, const DenseTensor& a);
SparseTensor load_sparse_snapshot(std::istream& is);
DenseTensor load_dense_snapshot(std::istream& is);
void save_snapshot(const std::string& path, const SparseTensor& s);
SparseTensor load_sparse_snapshot(const std::string& path);

}  // namespace hot
