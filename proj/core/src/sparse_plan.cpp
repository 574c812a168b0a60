#include "hot/sparse_plan.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "hot/equivariant_linear.hpp"

namespace hot {

std::uint64_t LinearPlan::work() const {
  std::uint64_t w = 0;
  for (auto& e : entries) {
    if (e.gather) {
      for (int v : e.idx) w += v >= 0;
    } else {
      w += e.pairs.size();
    }
  }
  return w + bias_idx.size();
}

namespace {

// code -> position in the class list, -1 for excluded classes.
std::vector<int> class_lookup(const std::vector<EquivalenceClass>& classes, int arity) {
  if (arity > 6) throw std::invalid_argument("sparse plan: k + l > 6 unsupported");
  std::vector<int> t(arity == 0 ? 1 : (1u << (3 * arity)), -1);
  for (std::size_t c = 0; c < classes.size(); ++c) t[pattern_code(classes[c].part)] = static_cast<int>(c);
  return t;
}

}  // namespace

LinearPlan build_linear_plan(const EdgeSet& in, const EdgeIndex& in_ix, const std::vector<int>& out_tuples, int l,
                             int out_rows, const std::vector<EquivalenceClass>& classes) {
  int k = in.k;
  LinearPlan plan;
  plan.out_rows = out_rows;
  plan.entries.resize(classes.size());
  plan.bias_idx.resize(out_rows);
  for (int r = 0; r < out_rows; ++r) plan.bias_idx[r] = bias_row(out_tuples.data() + static_cast<std::size_t>(r) * l, l);
  bool any_pairs = false;
  std::vector<std::uint32_t> qcode(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (classes[c].k != k || classes[c].l != l) throw std::invalid_argument("build_linear_plan: class arity mismatch");
    plan.entries[c].gather = classes[c].is_lightweight();
    any_pairs = any_pairs || !plan.entries[c].gather;
    qcode[c] = pattern_code(classes[c].mu_q);
  }
  std::vector<int> i(k);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    auto& e = plan.entries[c];
    if (!e.gather) continue;
    e.idx.assign(out_rows, -1);
    // output position feeding each input position
    std::vector<int> src_pos(k);
    for (int t = 0; t < k; ++t)
      for (int s = l - 1; s >= 0; --s)
        if (classes[c].part.rgs[k + s] == classes[c].part.rgs[t]) src_pos[t] = s;
    for (int r = 0; r < out_rows; ++r) {
      const int* j = out_tuples.data() + static_cast<std::size_t>(r) * l;
      if (pattern_code(j, l) != qcode[c]) continue;
      for (int t = 0; t < k; ++t) i[t] = j[src_pos[t]];
      e.idx[r] = in_ix.find(i.data());
    }
  }
  if (any_pairs) {
    auto lookup = class_lookup(classes, k + l);
    std::vector<int> ij(k + l);
    for (int r = 0; r < out_rows; ++r) {
      std::copy_n(out_tuples.data() + static_cast<std::size_t>(r) * l, l, ij.data() + k);
      for (int s = 0; s < in.size(); ++s) {
        std::copy_n(in.tuple(s), k, ij.data());
        int c = lookup[pattern_code(ij.data(), k + l)];
        if (c < 0 || plan.entries[c].gather) continue;
        plan.entries[c].pairs.src.push_back(s);
        plan.entries[c].pairs.dst.push_back(r);
      }
    }
  }
  return plan;
}

LinearPlan build_linear_plan(const EdgeSet& in, const EdgeSet& out, const std::vector<EquivalenceClass>& classes) {
  EdgeIndex ix(in);
  return build_linear_plan(in, ix, out.idx, out.k, out.size(), classes);
}

std::vector<PatternGroup> group_by_pattern(const EdgeSet& e) {
  auto parts = enumerate_classes(e.k);
  std::vector<PatternGroup> groups(parts.size());
  std::vector<int> by_code(e.k == 0 ? 1 : (1u << (3 * e.k)), -1);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    groups[p].pattern = parts[p];
    by_code[pattern_code(parts[p])] = static_cast<int>(p);
    groups[p].local.assign(e.size(), -1);
  }
  std::vector<int> rg(e.k);
  for (int r = 0; r < e.size(); ++r) {
    const int* t = e.tuple(r);
    int u = e.k == 0 ? 0 : pattern_into(t, e.k, rg.data());
    auto& g = groups[by_code[e.k == 0 ? 0 : pattern_code(t, e.k)]];
    g.local[r] = static_cast<int>(g.rows.size());
    g.rows.push_back(r);
    // compact tuple: value at the first position of each block
    std::size_t base = g.compact.size();
    g.compact.resize(base + u);
    for (int s = e.k - 1; s >= 0; --s) g.compact[base + rg[s]] = t[s];
  }
  return groups;
}

std::vector<EquivalenceClass> compact_classes(int k, int u) {
  return u == 0 ? all_classes(k, 0) : lightweight_subset(k, u);
}

std::uint64_t AttentionPlan::pair_count() const {
  std::uint64_t n = 0;
  for (auto& c : classes) n += c.pairs.size();
  return n;
}

std::uint64_t AttentionPlan::kernel_work() const {
  std::uint64_t n = 0;
  for (auto& c : classes) n += c.key_group.size() + c.query_group.size();
  return n;
}

AttentionPlan build_attention_plan(const EdgeSet& in, const EdgeSet& out, const std::vector<EquivalenceClass>& classes,
                                   AttentionPlanOptions opt) {
  if (in.n != out.n) throw std::invalid_argument("build_attention_plan: n mismatch");
  AttentionPlan plan;
  plan.k = in.k;
  plan.l = out.k;
  plan.out_rows = out.size();
  int k = in.k, l = out.k;
  plan.in_groups = group_by_pattern(in);
  plan.out_groups = group_by_pattern(out);
  plan.key_plans.resize(plan.in_groups.size());
  plan.query_plans.resize(plan.out_groups.size());
  std::vector<char> need_key(plan.in_groups.size(), 0), need_query(plan.out_groups.size(), 0);
  auto in_parts = enumerate_classes(k);
  auto out_parts = enumerate_classes(l);
  auto find_part = [](const std::vector<Partition>& ps, const Partition& p) {
    return static_cast<int>(std::find(ps.begin(), ps.end(), p) - ps.begin());
  };
  plan.classes.resize(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (classes[c].k != k || classes[c].l != l) throw std::invalid_argument("build_attention_plan: class arity mismatch");
    plan.classes[c].key_pattern = find_part(in_parts, classes[c].mu_k);
    plan.classes[c].query_pattern = find_part(out_parts, classes[c].mu_q);
    need_key[plan.classes[c].key_pattern] = 1;
    need_query[plan.classes[c].query_pattern] = 1;
  }
  EdgeIndex ix(in);
  for (std::size_t p = 0; p < plan.in_groups.size(); ++p) {
    if (!need_key[p]) continue;
    auto& g = plan.in_groups[p];
    int u = g.pattern.blocks();
    plan.key_plans[p] = build_linear_plan(in, ix, g.compact, u, static_cast<int>(g.rows.size()), compact_classes(k, u));
  }
  for (std::size_t p = 0; p < plan.out_groups.size(); ++p) {
    if (!need_query[p]) continue;
    auto& g = plan.out_groups[p];
    int u = l == 0 ? 0 : g.pattern.blocks();
    plan.query_plans[p] = build_linear_plan(in, ix, g.compact, u, static_cast<int>(g.rows.size()), compact_classes(k, u));
  }
  if (opt.pairs && !classes.empty()) {
    auto lookup = class_lookup(classes, k + l);
    std::vector<int> ij(k + l);
    for (int r = 0; r < out.size(); ++r) {
      if (l > 0) std::copy_n(out.tuple(r), l, ij.data() + k);
      for (int s = 0; s < in.size(); ++s) {
        std::copy_n(in.tuple(s), k, ij.data());
        int c = lookup[pattern_code(ij.data(), k + l)];
        if (c < 0) continue;
        auto& cp = plan.classes[c];
        cp.pairs.src.push_back(plan.in_groups[cp.key_pattern].local[s]);
        cp.pairs.dst.push_back(plan.out_groups[cp.query_pattern].local[r]);
      }
    }
    for (auto& cp : plan.classes) {
      cp.offsets.clear();
      for (std::size_t p = 0; p < cp.pairs.size(); ++p)
        if (p == 0 || cp.pairs.dst[p] != cp.pairs.dst[p - 1]) cp.offsets.push_back(static_cast<int>(p));
      cp.offsets.push_back(static_cast<int>(cp.pairs.size()));
    }
  }
  if (opt.groups) {
    for (std::size_t c = 0; c < classes.size(); ++c) {
      auto& cp = plan.classes[c];
      const auto& mu = classes[c];
      auto shared = mu.shared_blocks();
      std::vector<int> in_pos, out_pos;
      for (int b : shared) {
        int t = 0;
        while (mu.part.rgs[t] != b) ++t;
        in_pos.push_back(t);
        int s = 0;
        while (mu.part.rgs[k + s] != b) ++s;
        out_pos.push_back(s);
      }
      auto& kg = plan.in_groups[cp.key_pattern];
      auto& qg = plan.out_groups[cp.query_pattern];
      std::unordered_map<std::uint64_t, int> ids;
      ids.reserve(kg.rows.size() * 2 + 1);
      cp.key_group.resize(kg.rows.size());
      for (std::size_t r = 0; r < kg.rows.size(); ++r) {
        const int* t = in.tuple(kg.rows[r]);
        std::uint64_t code = 0;
        for (int p : in_pos) code = code * static_cast<std::uint64_t>(in.n) + static_cast<std::uint64_t>(t[p]);
        auto [it, fresh] = ids.emplace(code, static_cast<int>(ids.size()));
        cp.key_group[r] = it->second;
      }
      cp.groups = static_cast<int>(ids.size());
      cp.query_group.resize(qg.rows.size());
      for (std::size_t r = 0; r < qg.rows.size(); ++r) {
        const int* t = l == 0 ? nullptr : out.tuple(qg.rows[r]);
        std::uint64_t code = 0;
        for (int p : out_pos) code = code * static_cast<std::uint64_t>(in.n) + static_cast<std::uint64_t>(t[p]);
        auto it = ids.find(code);
        cp.query_group[r] = it == ids.end() ? -1 : it->second;
      }
    }
  }
  return plan;
}

}  // namespace hot
