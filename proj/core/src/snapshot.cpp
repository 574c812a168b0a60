#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hot/binio.hpp"
#include "hot/tensor.hpp"
#include "json.hpp"

namespace hot {

namespace {

constexpr char kMagic[4] = {'H', 'O', 'T', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_header(std::ostream& os, const nlohmann::json& h) { binio::put_block(os, kMagic, kVersion, h.dump()); }

nlohmann::json read_header(std::istream& is) { return nlohmann::json::parse(binio::get_block(is, kMagic, kVersion)); }

}  // namespace

using binio::get_f64;
using binio::get_u32;
using binio::put_f64;
using binio::put_u32;

void save_snapshot(std::ostream& os, const SparseTensor& s) {
  write_header(os, {{"kind", "sparse"}, {"n", s.n()}, {"k", s.k()}, {"d", s.d()}, {"m", s.m()}});
  for (int v : s.edges.idx) put_u32(os, static_cast<std::uint32_t>(v));
  for (double x : s.values.v) put_f64(os, x);
}

void save_snapshot(std::ostream& os, const DenseTensor& a) {
  write_header(os, {{"kind", "dense"}, {"n", a.n}, {"k", a.k}, {"d", a.d}, {"m", a.positions()}});
  for (double x : a.values) put_f64(os, x);
}

SparseTensor load_sparse_snapshot(std::istream& is) {
  auto h = read_header(is);
  if (h.at("kind") != "sparse") throw std::runtime_error("snapshot: not a sparse tensor");
  int n = h.at("n"), k = h.at("k"), d = h.at("d"), m = h.at("m");
  SparseTensor s;
  s.edges = EdgeSet(n, k);
  if (k == 0)
    s.edges.rows0 = m;
  else
    s.edges.idx.resize(static_cast<std::size_t>(m) * k);
  for (auto& v : s.edges.idx) v = static_cast<int>(get_u32(is));
  s.values = Matrix(m, d);
  for (auto& x : s.values.v) x = get_f64(is);
  s.validate();
  return s;
}

DenseTensor load_dense_snapshot(std::istream& is) {
  auto h = read_header(is);
  if (h.at("kind") != "dense") throw std::runtime_error("snapshot: not a dense tensor");
  DenseTensor a(h.at("n"), h.at("k"), h.at("d"));
  for (auto& x : a.values) x = get_f64(is);
  return a;
}

void save_snapshot(const std::string& path, const SparseTensor& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("snapshot: cannot open " + path);
  save_snapshot(os, s);
}

SparseTensor load_sparse_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("snapshot: cannot open " + path);
  return load_sparse_snapshot(is);
}

}  // namespace hot
