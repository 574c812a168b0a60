#include <stdexcept>

#include "hot/equivariant_linear.hpp"

namespace hot {

Var linear_forward(Tape& t, const LinearEquivariant& L, const Var& x, const LinearPlan& plan) {
  if (x->value.cols != L.d_in) throw std::invalid_argument("linear_forward: channel mismatch");
  if (plan.entries.size() != L.classes.size()) throw std::invalid_argument("linear_forward: plan/class mismatch");
  std::vector<const std::vector<int>*> idx;
  std::vector<Var> ws;
  Var acc;
  for (std::size_t c = 0; c < L.classes.size(); ++c) {
    const auto& e = plan.entries[c];
    if (e.gather) {
      idx.push_back(&e.idx);
      ws.push_back(t.param(L.weights[c]));
      continue;
    }
    Var pooled = ad::gather_scatter(t, x, nullptr, &e.pairs, plan.out_rows);
    Var y = ad::matmul(t, pooled, t.param(L.weights[c]));
    acc = acc ? ad::add(t, acc, y) : y;
  }
  Var g = ad::gather_linear(t, x, idx, ws, t.param(L.bias), &plan.bias_idx, plan.out_rows);
  return acc ? ad::add(t, acc, g) : g;
}

SparseTensor forward_sparse(const LinearEquivariant& L, const SparseTensor& s, const EdgeSet& eout) {
  s.validate();
  if (s.k() != L.k || eout.k != L.l) throw std::invalid_argument("forward_sparse: order mismatch");
  if (s.n() != eout.n) throw std::invalid_argument("forward_sparse: n mismatch");
  if (s.d() != L.d_in) throw std::invalid_argument("forward_sparse: channel mismatch");
  LinearPlan plan = build_linear_plan(s.edges, eout, L.classes);
  Tape t(false);
  Var y = linear_forward(t, L, t.constant(s.values), plan);
  SparseTensor out;
  out.edges = eout;
  out.values = std::move(y->value);
  return out;
}

}  // namespace hot
