#include "hot/equivariant_linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "hot/binio.hpp"
#include "hot/members.hpp"
#include "json.hpp"

namespace hot {

std::string to_string(ClassSetMode m) {
  switch (m) {
    case ClassSetMode::Full: return "full";
    case ClassSetMode::Lightweight: return "lightweight";
    case ClassSetMode::Explicit: return "explicit";
  }
  return "?";
}

ClassSetMode class_set_mode_from_string(const std::string& s) {
  if (s == "full") return ClassSetMode::Full;
  if (s == "lightweight") return ClassSetMode::Lightweight;
  if (s == "explicit") return ClassSetMode::Explicit;
  throw std::invalid_argument("unknown class set mode: " + s);
}

LinearEquivariant LinearEquivariant::make(int k, int l, int d_in, int d_out, ClassSetMode mode,
                                          std::vector<EquivalenceClass> explicit_classes) {
  if (k < 0 || l < 0 || d_in < 0 || d_out < 0) throw std::invalid_argument("LinearEquivariant: negative shape");
  LinearEquivariant L;
  L.k = k;
  L.l = l;
  L.d_in = d_in;
  L.d_out = d_out;
  L.mode = mode;
  switch (mode) {
    case ClassSetMode::Full: L.classes = all_classes(k, l); break;
    case ClassSetMode::Lightweight: L.classes = lightweight_subset(k, l); break;
    case ClassSetMode::Explicit:
      for (auto& c : explicit_classes)
        if (c.k != k || c.l != l) throw std::invalid_argument("LinearEquivariant: explicit class arity mismatch");
      std::sort(explicit_classes.begin(), explicit_classes.end(),
                [](const EquivalenceClass& a, const EquivalenceClass& b) { return a.part < b.part; });
      L.classes = std::move(explicit_classes);
      break;
  }
  L.weights.assign(L.classes.size(), Matrix(d_in, d_out));
  L.bias = Matrix(static_cast<int>(bell(l)), d_out);
  return L;
}

int LinearEquivariant::class_index(const Partition& part) const {
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (classes[c].part == part) return static_cast<int>(c);
  return -1;
}

std::vector<Matrix*> LinearEquivariant::parameters() {
  std::vector<Matrix*> p;
  for (auto& w : weights) p.push_back(&w);
  p.push_back(&bias);
  return p;
}

std::size_t LinearEquivariant::parameter_count() const {
  return weights.size() * static_cast<std::size_t>(d_in) * d_out + bias.size();
}

namespace {

struct PatternTable {
  std::vector<int> by_code;
  explicit PatternTable(int arity) {
    auto parts = enumerate_classes(arity);
    by_code.assign(arity == 0 ? 1 : (1u << (3 * arity)), -1);
    for (std::size_t r = 0; r < parts.size(); ++r) by_code[pattern_code(parts[r])] = static_cast<int>(r);
  }
};

const PatternTable& pattern_table(int arity) {
  static const std::vector<PatternTable> tables = [] {
    std::vector<PatternTable> t;
    for (int a = 0; a <= 6; ++a) t.emplace_back(a);
    return t;
  }();
  if (arity > 6) throw std::invalid_argument("pattern table: arity > 6 unsupported");
  return tables[arity];
}

}  // namespace

int bias_row(const int* j, int l) {
  if (l == 0) return 0;
  return pattern_table(l).by_code[pattern_code(j, l)];
}

void init_params(LinearEquivariant& layer, std::uint64_t seed, InitScheme scheme) {
  layer.seed = seed;
  std::mt19937_64 rng(seed);
  double bound = std::sqrt(6.0 / std::max(1, layer.d_in + layer.d_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& w : layer.weights)
    for (auto& x : w.v) x = scheme == InitScheme::Zero ? 0.0 : u(rng);
  std::fill(layer.bias.v.begin(), layer.bias.v.end(), 0.0);
}

DenseTensor forward_dense(const LinearEquivariant& L, const DenseTensor& a) {
  if (a.k != L.k || a.d != L.d_in) throw std::invalid_argument("forward_dense: order/channel mismatch");
  int n = a.n;
  DenseTensor out(n, L.l, L.d_out);
  std::vector<ClassShape> shapes;
  for (auto& c : L.classes) shapes.emplace_back(c);
  std::vector<int> j(L.l);
  std::vector<double> pooled(L.d_in);
  for (std::size_t f = 0; f < out.positions(); ++f) {
    out.unflat(f, j.data());
    std::uint32_t qc = pattern_code(j.data(), L.l);
    double* o = out.at(f);
    for (std::size_t c = 0; c < L.classes.size(); ++c) {
      const ClassShape& sh = shapes[c];
      if (sh.q_code != qc) continue;
      std::fill(pooled.begin(), pooled.end(), 0.0);
      bool any = false;
      sh.for_each_member(j.data(), n, [&](const int* i) {
        const double* src = a.at(std::span<const int>(i, L.k));
        for (int ch = 0; ch < L.d_in; ++ch) pooled[ch] += src[ch];
        any = true;
      });
      if (any) axpy_row_matmul(pooled.data(), L.weights[c], o);
    }
    const double* b = L.bias.row(bias_row(j.data(), L.l));
    for (int ch = 0; ch < L.d_out; ++ch) o[ch] += b[ch];
  }
  return out;
}

DenseTensor forward_lightweight(const LinearEquivariant& L, const DenseTensor& a) {
  if (L.l == 0) throw std::invalid_argument("forward_lightweight: l = 0 requires a full layer");
  if (a.k != L.k || a.d != L.d_in) throw std::invalid_argument("forward_lightweight: order/channel mismatch");
  for (auto& c : L.classes)
    if (!c.is_lightweight()) throw std::invalid_argument("forward_lightweight: non-lightweight class " + c.to_string());
  DenseTensor out(a.n, L.l, L.d_out);
  std::vector<ClassShape> shapes;
  for (auto& c : L.classes) shapes.emplace_back(c);
  std::vector<int> j(L.l), i(L.k);
  for (std::size_t f = 0; f < out.positions(); ++f) {
    out.unflat(f, j.data());
    std::uint32_t qc = pattern_code(j.data(), L.l);
    double* o = out.at(f);
    for (std::size_t c = 0; c < L.classes.size(); ++c) {
      const ClassShape& sh = shapes[c];
      if (sh.q_code != qc) continue;
      for (int t = 0; t < L.k; ++t) i[t] = j[sh.block_out_pos[sh.in_block[t]]];
      axpy_row_matmul(a.at(i), L.weights[c], o);
    }
    const double* b = L.bias.row(bias_row(j.data(), L.l));
    for (int ch = 0; ch < L.d_out; ++ch) o[ch] += b[ch];
  }
  return out;
}

DenseTensor forward_uniform_1_to_k(const LinearEquivariant& L, const DenseTensor& a) {
  if (L.k != 1 || a.k != 1 || a.d != L.d_in) throw std::invalid_argument("forward_uniform_1_to_k: expects order-1 input");
  int kk = L.l;
  auto subset = uniform_1_to_k_subset(kk);
  std::vector<int> slot(L.classes.size(), -2);  // -1: input alone, t: tied to output t
  for (std::size_t c = 0; c < L.classes.size(); ++c) {
    if (std::find(subset.begin(), subset.end(), L.classes[c]) == subset.end())
      throw std::invalid_argument("forward_uniform_1_to_k: class outside the 1+k subset");
    slot[c] = -1;
    for (int t = 0; t < kk; ++t)
      if (L.classes[c].part.rgs[1 + t] == 0) slot[c] = t;
  }
  int n = a.n;
  std::vector<double> total(L.d_in, 0.0), rest(L.d_in);
  for (int v = 0; v < n; ++v)
    for (int ch = 0; ch < L.d_in; ++ch) total[ch] += a.at(static_cast<std::size_t>(v))[ch];
  DenseTensor out(n, kk, L.d_out);
  std::vector<int> j(kk);
  std::vector<int> distinct(kk);
  std::iota(distinct.begin(), distinct.end(), 0);
  int brow = bias_row(distinct.data(), kk);
  for (std::size_t f = 0; f < out.positions(); ++f) {
    out.unflat(f, j.data());
    bool ok = true;
    for (int s = 0; s < kk && ok; ++s)
      for (int t = s + 1; t < kk && ok; ++t) ok = j[s] != j[t];
    if (!ok) continue;
    double* o = out.at(f);
    rest = total;
    for (int t = 0; t < kk; ++t)
      for (int ch = 0; ch < L.d_in; ++ch) rest[ch] -= a.at(static_cast<std::size_t>(j[t]))[ch];
    for (std::size_t c = 0; c < L.classes.size(); ++c) {
      const double* src = slot[c] < 0 ? rest.data() : a.at(static_cast<std::size_t>(j[slot[c]]));
      axpy_row_matmul(src, L.weights[c], o);
    }
    for (int ch = 0; ch < L.d_out; ++ch) o[ch] += L.bias(brow, ch);
  }
  return out;
}

std::vector<EquivalenceClass> effective_classes(int k, const Partition& p) {
  std::vector<EquivalenceClass> out;
  for (auto& c : all_classes(k, p.size()))
    if (c.mu_q == p) out.push_back(c);
  return out;
}

CompactLayer construct_compact(const LinearEquivariant& full, const EquivalenceClass& mu, CompactRole role) {
  const Partition& target = role == CompactRole::Query ? mu.mu_q : mu.mu_k;
  if (full.l != target.size()) throw std::invalid_argument("construct_compact: layer order does not match restriction");
  int u = target.blocks();
  CompactLayer out;
  out.map = restrict(mu, role == CompactRole::Query ? Side::Output : Side::Input);
  std::vector<EquivalenceClass> merged;
  std::vector<int> source;
  for (std::size_t c = 0; c < full.classes.size(); ++c) {
    const auto& nu = full.classes[c];
    if (nu.mu_q != target) continue;
    std::vector<int> labels(nu.part.rgs.begin(), nu.part.rgs.begin() + full.k);
    for (int b = 0; b < u; ++b) {
      int s = 0;
      while (target.rgs[s] != b) ++s;
      labels.push_back(nu.part.rgs[full.k + s]);
    }
    // relabel to first-occurrence order
    std::vector<int> map(full.k + full.l + 1, -1), rgs(labels.size());
    int next = 0;
    for (std::size_t t = 0; t < labels.size(); ++t) {
      if (map[labels[t]] < 0) map[labels[t]] = next++;
      rgs[t] = map[labels[t]];
    }
    merged.emplace_back(Partition(rgs), full.k, u);
    source.push_back(static_cast<int>(c));
  }
  out.layer = LinearEquivariant::make(full.k, u, full.d_in, full.d_out, ClassSetMode::Explicit, merged);
  out.layer.seed = full.seed;
  for (std::size_t t = 0; t < merged.size(); ++t)
    out.layer.weights[out.layer.class_index(merged[t].part)] = full.weights[source[t]];
  std::vector<int> distinct(u);
  std::iota(distinct.begin(), distinct.end(), 0);
  int src_row = 0;
  if (full.l > 0) {
    std::vector<int> rep(target.rgs.begin(), target.rgs.end());
    src_row = bias_row(rep.data(), full.l);
  }
  int dst_row = bias_row(distinct.data(), u);
  std::copy_n(full.bias.row(src_row), full.d_out, out.layer.bias.row(dst_row));
  return out;
}

namespace {
constexpr char kLinMagic[4] = {'H', 'O', 'T', 'L'};
}

void save_params(std::ostream& os, const LinearEquivariant& L) {
  nlohmann::json h{{"k", L.k}, {"l", L.l}, {"d_in", L.d_in}, {"d_out", L.d_out}, {"mode", to_string(L.mode)},
                   {"seed", L.seed}};
  auto cls = nlohmann::json::array();
  for (auto& c : L.classes) cls.push_back(c.part.rgs);
  h["classes"] = cls;
  binio::put_block(os, kLinMagic, 1, h.dump());
  for (auto& w : L.weights)
    for (double x : w.v) binio::put_f64(os, x);
  for (double x : L.bias.v) binio::put_f64(os, x);
}

LinearEquivariant load_params(std::istream& is) {
  auto h = nlohmann::json::parse(binio::get_block(is, kLinMagic, 1));
  int k = h.at("k"), l = h.at("l");
  std::vector<EquivalenceClass> cls;
  for (auto& r : h.at("classes")) cls.emplace_back(Partition(r.get<std::vector<int>>()), k, l);
  auto L = LinearEquivariant::make(k, l, h.at("d_in"), h.at("d_out"), ClassSetMode::Explicit, cls);
  L.mode = class_set_mode_from_string(h.at("mode"));
  L.seed = h.at("seed");
  for (auto& w : L.weights)
    for (auto& x : w.v) x = binio::get_f64(is);
  for (auto& x : L.bias.v) x = binio::get_f64(is);
  return L;
}

}  // namespace hot
