#include "hot/partitions.hpp"

#include "hot/members.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace hot {

Partition::Partition(std::vector<int> s) : rgs(std::move(s)) {
  if (!valid_rgs(rgs)) throw std::invalid_argument("Partition: not a restricted growth string");
}

bool Partition::valid_rgs(std::span<const int> s) {
  int mx = -1;
  for (int v : s) {
    if (v < 0 || v > mx + 1) return false;
    mx = std::max(mx, v);
  }
  return true;
}

int Partition::blocks() const {
  int mx = -1;
  for (int v : rgs) mx = std::max(mx, v);
  return mx + 1;
}

std::string Partition::to_string() const {
  std::ostringstream os;
  os << '{';
  for (int b = 0; b < blocks(); ++b) {
    if (b) os << ',';
    os << '{';
    bool first = true;
    for (int t = 0; t < size(); ++t) {
      if (rgs[t] != b) continue;
      if (!first) os << ',';
      os << t + 1;
      first = false;
    }
    os << '}';
  }
  os << '}';
  return os.str();
}

namespace {

Partition relabel(const std::vector<int>& labels) {
  int top = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  std::vector<int> map(top + 1, -1), out(labels.size());
  int next = 0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    int& m = map[labels[t]];
    if (m < 0) m = next++;
    out[t] = m;
  }
  return Partition(std::move(out));
}

}  // namespace

EquivalenceClass::EquivalenceClass(Partition p, int k_, int l_) : part(std::move(p)), k(k_), l(l_) {
  if (k < 0 || l < 0 || part.size() != k + l) throw std::invalid_argument("EquivalenceClass: arity mismatch");
  mu_k = relabel(std::vector<int>(part.rgs.begin(), part.rgs.begin() + k));
  mu_q = relabel(std::vector<int>(part.rgs.begin() + k, part.rgs.end()));
  u_k = mu_k.blocks();
  u_q = mu_q.blocks();
}

std::vector<int> EquivalenceClass::shared_blocks() const {
  std::vector<int> out;
  for (int b = 0; b < part.blocks(); ++b) {
    bool in = false, outp = false;
    for (int t = 0; t < k + l; ++t)
      if (part.rgs[t] == b) (t < k ? in : outp) = true;
    if (in && outp) out.push_back(b);
  }
  return out;
}

bool EquivalenceClass::is_lightweight() const {
  for (int t = 0; t < k; ++t) {
    bool hit = false;
    for (int s = k; s < k + l; ++s) hit = hit || part.rgs[s] == part.rgs[t];
    if (!hit) return false;
  }
  return true;
}

std::uint64_t bell(int arity) {
  if (arity < 0) throw std::invalid_argument("bell: negative arity");
  if (arity == 0) return 1;
  // Bell triangle
  std::vector<std::uint64_t> row{1};
  for (int r = 1; r < arity; ++r) {
    std::vector<std::uint64_t> next{row.back()};
    for (auto v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.back();
}

std::vector<Partition> enumerate_classes(int arity) {
  if (arity < 0) throw std::invalid_argument("enumerate_classes: negative arity");
  std::vector<Partition> out;
  if (arity == 0) {
    out.emplace_back();
    return out;
  }
  std::vector<int> s(arity, 0), mx(arity, 0);
  for (;;) {
    out.emplace_back(s);
    int t = arity - 1;
    while (t > 0 && s[t] == mx[t - 1] + 1) --t;
    if (t == 0) break;
    ++s[t];
    mx[t] = std::max(mx[t - 1], s[t]);
    for (int r = t + 1; r < arity; ++r) {
      s[r] = 0;
      mx[r] = mx[t];
    }
  }
  return out;
}

std::vector<EquivalenceClass> all_classes(int k, int l) {
  std::vector<EquivalenceClass> out;
  for (auto& p : enumerate_classes(k + l)) out.emplace_back(p, k, l);
  return out;
}

int pattern_into(const int* index, int len, int* out) {
  int blocks = 0;
  for (int t = 0; t < len; ++t) {
    int lab = -1;
    for (int s = 0; s < t; ++s)
      if (index[s] == index[t]) {
        lab = out[s];
        break;
      }
    out[t] = lab < 0 ? blocks++ : lab;
  }
  return blocks;
}

Partition pattern_of(std::span<const int> index) {
  if (index.empty()) throw std::invalid_argument("pattern_of: empty index");
  std::vector<int> r(index.size());
  pattern_into(index.data(), static_cast<int>(index.size()), r.data());
  Partition p;
  p.rgs = std::move(r);
  return p;
}

std::uint32_t pattern_code(const int* index, int len) {
  int r[8];
  pattern_into(index, len, r);
  std::uint32_t c = 0;
  for (int t = 0; t < len; ++t) c |= static_cast<std::uint32_t>(r[t]) << (3 * t);
  return c;
}

std::uint32_t pattern_code(const Partition& p) {
  std::uint32_t c = 0;
  for (int t = 0; t < p.size(); ++t) c |= static_cast<std::uint32_t>(p.rgs[t]) << (3 * t);
  return c;
}

bool in_class(std::span<const int> i, std::span<const int> j, const EquivalenceClass& mu) {
  if (static_cast<int>(i.size()) != mu.k || static_cast<int>(j.size()) != mu.l)
    throw std::invalid_argument("in_class: arity mismatch");
  std::vector<int> ij(i.begin(), i.end());
  ij.insert(ij.end(), j.begin(), j.end());
  if (ij.empty()) return true;
  return pattern_of(ij) == mu.part;
}

Restriction restrict(const EquivalenceClass& mu, Side side) {
  Restriction r;
  r.part = side == Side::Input ? mu.mu_k : mu.mu_q;
  r.u = r.part.blocks();
  r.pos_map = r.part.rgs;
  return r;
}

std::vector<EquivalenceClass> lightweight_subset(int k, int l) {
  if (k < 1 || l < 1) throw std::invalid_argument("lightweight_subset: requires k >= 1 and l >= 1");
  std::vector<EquivalenceClass> out;
  for (auto& c : all_classes(k, l))
    if (c.is_lightweight()) out.push_back(c);
  return out;
}

std::vector<int> fix_index(const EquivalenceClass& mu, std::span<const int> j) {
  if (!mu.is_lightweight()) throw std::invalid_argument("fix_index: class is not lightweight");
  if (static_cast<int>(j.size()) != mu.l) throw std::invalid_argument("fix_index: arity mismatch");
  if (mu.l > 0 && pattern_of(j) != mu.mu_q) throw std::invalid_argument("fix_index: incompatible output pattern");
  std::vector<int> i(mu.k);
  for (int t = 0; t < mu.k; ++t)
    for (int s = 0; s < mu.l; ++s)
      if (mu.part.rgs[mu.k + s] == mu.part.rgs[t]) {
        i[t] = j[s];
        break;
      }
  return i;
}

std::vector<EquivalenceClass> uniform_1_to_k_subset(int k) {
  if (k < 1) throw std::invalid_argument("uniform_1_to_k_subset: k >= 1 required");
  std::vector<EquivalenceClass> out;
  for (auto& c : all_classes(1, k))
    if (c.u_q == k) out.push_back(c);
  return out;
}

std::vector<int> compact_index(const Restriction& r, std::span<const int> idx) {
  std::vector<int> c(r.u);
  std::vector<char> seen(r.u, 0);
  for (std::size_t t = 0; t < idx.size(); ++t) {
    int b = r.pos_map[t];
    if (!seen[b]) {
      c[b] = idx[t];
      seen[b] = 1;
    }
  }
  return c;
}

ClassShape::ClassShape(const EquivalenceClass& c) : k(c.k), l(c.l) {
  int nb = c.part.blocks();
  block_out_pos.assign(nb, -1);
  for (int s = c.l - 1; s >= 0; --s) block_out_pos[c.part.rgs[c.k + s]] = s;
  in_block.assign(c.part.rgs.begin(), c.part.rgs.begin() + c.k);
  for (int b = 0; b < nb; ++b)
    if (block_out_pos[b] < 0) free_blocks.push_back(b);
  q_code = pattern_code(c.mu_q);
}

std::uint64_t ClassShape::members_per_output(int n) const {
  int used = 0;
  for (int b : block_out_pos) used += b >= 0;
  std::uint64_t r = 1;
  for (std::size_t t = 0; t < free_blocks.size(); ++t) {
    int avail = n - used - static_cast<int>(t);
    if (avail <= 0) return 0;
    r *= static_cast<std::uint64_t>(avail);
  }
  return r;
}

}  // namespace hot
