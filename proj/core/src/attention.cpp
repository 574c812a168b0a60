#include "hot/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "hot/rng.hpp"

namespace hot {

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::Softmax: return "softmax";
    case KernelKind::Performer: return "performer";
    case KernelKind::Elu1: return "elu1";
    case KernelKind::Constant: return "constant";
  }
  return "?";
}

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "softmax") return KernelKind::Softmax;
  if (s == "performer") return KernelKind::Performer;
  if (s == "elu1") return KernelKind::Elu1;
  if (s == "constant") return KernelKind::Constant;
  throw std::invalid_argument("unknown kernel: " + s);
}

KernelMap KernelMap::make(KernelKind kind, int d_K, int d_H, std::uint64_t seed) {
  KernelMap km;
  km.kind = kind;
  km.d_K = kind == KernelKind::Elu1 ? d_H : d_K;
  km.seed = seed;
  if (kind == KernelKind::Performer) {
    km.projection = Matrix(d_K, d_H);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& x : km.projection.v) x = nd(rng);
  }
  return km;
}

Matrix kernel_features(const Matrix& x, const KernelMap& km, double prescale, bool shift) {
  switch (km.kind) {
    case KernelKind::Performer: {
      Tape t(false);
      return ad::performer_features(t, t.constant(x), &km.projection, prescale, shift)->value;
    }
    case KernelKind::Elu1: {
      Tape t(false);
      return ad::elu1(t, t.constant(x))->value;
    }
    case KernelKind::Constant: return Matrix(x.rows, km.d_K, 1.0 / std::sqrt(static_cast<double>(km.d_K)));
    case KernelKind::Softmax: break;
  }
  throw std::invalid_argument("kernel_features: softmax has no feature map");
}

AttentionParams AttentionParams::make(int k, int l, int d_in, int d_out, int H, int d_H, KernelMap kernel,
                                      std::vector<EquivalenceClass> classes, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("AttentionParams: k >= 1 required");
  if (H < 1 || d_H < 1) throw std::invalid_argument("AttentionParams: H, d_H >= 1 required");
  AttentionParams p;
  p.k = k;
  p.l = l;
  p.d_in = d_in;
  p.d_out = d_out;
  p.H = H;
  p.d_H = d_H;
  p.kernel = std::move(kernel);
  p.classes = classes.empty() ? all_classes(k, l) : std::move(classes);
  for (auto& c : p.classes)
    if (c.k != k || c.l != l) throw std::invalid_argument("AttentionParams: class arity mismatch");
  std::uniform_real_distribution<double> uv(-std::sqrt(6.0 / (d_in + d_H)), std::sqrt(6.0 / (d_in + d_H)));
  std::uniform_real_distribution<double> uo(-std::sqrt(6.0 / (d_H + d_out)), std::sqrt(6.0 / (d_H + d_out)));
  for (int h = 0; h < H; ++h) {
    for (std::size_t c = 0; c < p.classes.size(); ++c) {
      const auto& mu = p.classes[c];
      HeadClassParams b;
      b.query = LinearEquivariant::make(k, mu.u_q, d_in, d_H, mu.u_q == 0 ? ClassSetMode::Full : ClassSetMode::Lightweight);
      b.key = LinearEquivariant::make(k, mu.u_k, d_in, d_H, ClassSetMode::Lightweight);
      init_params(b.query, derive_seed(seed, {1, static_cast<std::uint64_t>(h), c}));
      init_params(b.key, derive_seed(seed, {2, static_cast<std::uint64_t>(h), c}));
      std::mt19937_64 rng(derive_seed(seed, {3, static_cast<std::uint64_t>(h), c}));
      b.w_v = Matrix(d_in, d_H);
      b.w_o = Matrix(d_H, d_out);
      for (auto& x : b.w_v.v) x = uv(rng);
      for (auto& x : b.w_o.v) x = uo(rng);
      p.bundles.push_back(std::move(b));
    }
  }
  return p;
}

void AttentionParams::filter_classes(const std::function<bool(const EquivalenceClass&)>& keep) {
  std::vector<EquivalenceClass> cls;
  std::vector<HeadClassParams> bs;
  std::vector<int> kept;
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (keep(classes[c])) {
      cls.push_back(classes[c]);
      kept.push_back(static_cast<int>(c));
    }
  for (int h = 0; h < H; ++h)
    for (int c : kept) bs.push_back(std::move(at(h, c)));
  classes = std::move(cls);
  bundles = std::move(bs);
}

std::vector<Matrix*> AttentionParams::parameters() {
  std::vector<Matrix*> ps;
  for (auto& b : bundles) {
    for (auto* m : b.query.parameters()) ps.push_back(m);
    for (auto* m : b.key.parameters()) ps.push_back(m);
    ps.push_back(&b.w_v);
    ps.push_back(&b.w_o);
  }
  return ps;
}

std::size_t AttentionParams::parameter_count() const {
  std::size_t n = 0;
  for (auto& b : bundles) n += b.query.parameter_count() + b.key.parameter_count() + b.w_v.size() + b.w_o.size();
  return n;
}

namespace {

std::uint64_t compact_flat(const int* idx, int len, int n) {
  int rg[8];
  int u = len == 0 ? 0 : pattern_into(idx, len, rg);
  int c[8];
  for (int s = len - 1; s >= 0; --s) c[rg[s]] = idx[s];
  std::uint64_t f = 0;
  for (int b = 0; b < u; ++b) f = f * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(c[b]);
  return f;
}

template <class Score, class Finish>
ClassCoefficients build_coefficients(const EquivalenceClass& mu, int n, Score&& score, Finish&& finish) {
  ClassCoefficients cc;
  cc.mu = mu;
  cc.n = n;
  ClassShape sh(mu);
  cc.per_j = sh.members_per_output(n);
  std::uint64_t positions = ipow(n, mu.l);
  std::vector<int> j(mu.l);
  for (std::uint64_t f = 0; f < positions; ++f) {
    std::uint64_t g = f;
    for (int t = mu.l - 1; t >= 0; --t) {
      j[t] = static_cast<int>(g % n);
      g /= n;
    }
    if (pattern_code(j.data(), mu.l) == sh.q_code) cc.j_flat.push_back(f);
  }
  std::size_t total = cc.j_flat.size() * cc.per_j;
  cc.src.resize(total);
  cc.alpha.resize(total);
  std::size_t p = 0;
  for (std::uint64_t jf : cc.j_flat) {
    std::uint64_t g = jf;
    for (int t = mu.l - 1; t >= 0; --t) {
      j[t] = static_cast<int>(g % n);
      g /= n;
    }
    std::size_t start = p;
    std::uint64_t qf = compact_flat(j.data(), mu.l, n);
    sh.for_each_member(j.data(), n, [&](const int* i) {
      std::uint64_t fi = 0;
      for (int t = 0; t < mu.k; ++t) fi = fi * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(i[t]);
      cc.src[p] = static_cast<std::uint32_t>(fi);
      cc.alpha[p] = score(qf, compact_flat(i, mu.k, n));
      ++p;
    });
    finish(cc.alpha.data() + start, p - start);
  }
  return cc;
}

}  // namespace

double ClassCoefficients::at(std::uint64_t i_flat, std::uint64_t jf) const {
  auto it = std::lower_bound(j_flat.begin(), j_flat.end(), jf);
  if (it == j_flat.end() || *it != jf) return 0.0;
  std::size_t b = static_cast<std::size_t>(it - j_flat.begin()) * per_j;
  for (std::size_t p = b; p < b + per_j; ++p)
    if (src[p] == i_flat) return alpha[p];
  return 0.0;
}

ClassCoefficients coeffs_softmax(const DenseTensor& qc, const DenseTensor& kc, const EquivalenceClass& mu, double scale) {
  if (qc.d != kc.d || qc.k != mu.u_q || kc.k != mu.u_k) throw std::invalid_argument("coeffs_softmax: compact shape mismatch");
  int d = qc.d;
  auto score = [&](std::uint64_t qf, std::uint64_t kf) {
    const double* a = qc.at(qf);
    const double* b = kc.at(kf);
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += a[c] * b[c];
    return scale * s;
  };
  auto finish = [](double* a, std::size_t len) {
    if (!len) return;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < len; ++t) mx = std::max(mx, a[t]);
    double z = 0.0;
    for (std::size_t t = 0; t < len; ++t) z += a[t] = std::exp(a[t] - mx);
    for (std::size_t t = 0; t < len; ++t) a[t] /= z;
  };
  return build_coefficients(mu, kc.n, score, finish);
}

ClassCoefficients coeffs_kernel(const DenseTensor& qc, const DenseTensor& kc, const EquivalenceClass& mu,
                                const KernelMap& km, double prescale, bool normalize) {
  if (qc.d != kc.d || qc.k != mu.u_q || kc.k != mu.u_k) throw std::invalid_argument("coeffs_kernel: compact shape mismatch");
  auto as_matrix = [](const DenseTensor& a) {
    Matrix m(static_cast<int>(a.positions()), a.d);
    m.v = a.values;
    return m;
  };
  Matrix fq = kernel_features(as_matrix(qc), km, prescale, normalize);
  Matrix fk = kernel_features(as_matrix(kc), km, prescale, normalize);
  int dK = fq.cols;
  auto score = [&](std::uint64_t qf, std::uint64_t kf) {
    const double* a = fq.row(static_cast<int>(qf));
    const double* b = fk.row(static_cast<int>(kf));
    double s = 0.0;
    for (int c = 0; c < dK; ++c) s += a[c] * b[c];
    return s;
  };
  auto finish = [normalize](double* a, std::size_t len) {
    if (!normalize || !len) return;
    double z = 0.0;
    for (std::size_t t = 0; t < len; ++t) z += a[t];
    for (std::size_t t = 0; t < len; ++t) a[t] = z > 0 ? a[t] / z : 0.0;
  };
  return build_coefficients(mu, kc.n, score, finish);
}

DenseTensor compact_query_dense(const HeadClassParams& b, const DenseTensor& a) {
  return b.query.l == 0 ? forward_dense(b.query, a) : forward_lightweight(b.query, a);
}

DenseTensor compact_key_dense(const HeadClassParams& b, const DenseTensor& a) { return forward_lightweight(b.key, a); }

DenseTensor attn_dense(const DenseTensor& a, const AttentionParams& p) {
  if (a.k != p.k || a.d != p.d_in) throw std::invalid_argument("attn_dense: order/channel mismatch");
  int n = a.n;
  DenseTensor out(n, p.l, p.d_out);
  Matrix am(static_cast<int>(a.positions()), a.d);
  am.v = a.values;
  double scale = 1.0 / std::sqrt(static_cast<double>(p.d_H));
  double prescale = std::pow(static_cast<double>(p.d_H), -0.25);
  std::vector<double> agg(p.d_H);
  for (int h = 0; h < p.H; ++h) {
    for (std::size_t c = 0; c < p.classes.size(); ++c) {
      const auto& mu = p.classes[c];
      const auto& b = p.at(h, static_cast<int>(c));
      Matrix v = matmul(am, b.w_v);
      ClassCoefficients cc;
      if (p.force_unit_alpha) {
        cc = build_coefficients(mu, n, [](std::uint64_t, std::uint64_t) { return 1.0; }, [](double*, std::size_t) {});
      } else {
        DenseTensor qc = compact_query_dense(b, a);
        DenseTensor kc = compact_key_dense(b, a);
        cc = p.kernel.kind == KernelKind::Softmax ? coeffs_softmax(qc, kc, mu, scale)
                                                  : coeffs_kernel(qc, kc, mu, p.kernel, prescale, p.normalize);
      }
      for (std::size_t t = 0; t < cc.j_flat.size(); ++t) {
        std::fill(agg.begin(), agg.end(), 0.0);
        for (std::size_t q = t * cc.per_j; q < (t + 1) * cc.per_j; ++q) {
          const double* vr = v.row(static_cast<int>(cc.src[q]));
          double w = cc.alpha[q];
          for (int e = 0; e < p.d_H; ++e) agg[e] += w * vr[e];
        }
        axpy_row_matmul(agg.data(), b.w_o, out.at(cc.j_flat[t]));
      }
    }
  }
  return out;
}

AttentionPlanOptions plan_options(const AttentionParams& p) {
  AttentionPlanOptions o;
  o.pairs = p.force_unit_alpha || p.kernel.kind == KernelKind::Softmax;
  o.groups = !o.pairs;
  return o;
}

namespace {

Var features(Tape& t, const AttentionParams& p, const Var& x) {
  switch (p.kernel.kind) {
    case KernelKind::Performer:
      return ad::performer_features(t, x, &p.kernel.projection, std::pow(static_cast<double>(p.d_H), -0.25),
                                    p.normalize);
    case KernelKind::Elu1: return ad::elu1(t, x);
    case KernelKind::Constant:
      return t.constant(Matrix(x->value.rows, p.kernel.d_K, 1.0 / std::sqrt(static_cast<double>(p.kernel.d_K))));
    case KernelKind::Softmax: break;
  }
  throw std::logic_error("features: softmax kernel");
}

}  // namespace

Var attention_forward(Tape& t, const AttentionParams& p, const Var& x, const AttentionPlan& plan, bool train) {
  if (x->value.cols != p.d_in) throw std::invalid_argument("attention_forward: channel mismatch");
  if (plan.classes.size() != p.classes.size()) throw std::invalid_argument("attention_forward: plan/class mismatch");
  auto opt = plan_options(p);
  double scale = 1.0 / std::sqrt(static_cast<double>(p.d_H));
  Var acc;
  for (int h = 0; h < p.H; ++h) {
    for (std::size_t c = 0; c < p.classes.size(); ++c) {
      const auto& cp = plan.classes[c];
      const auto& kg = plan.in_groups[cp.key_pattern];
      const auto& qg = plan.out_groups[cp.query_pattern];
      if (kg.rows.empty() || qg.rows.empty()) continue;
      if (opt.pairs && cp.offsets.empty()) throw std::logic_error("attention_forward: plan lacks pair lists");
      if (!opt.pairs && cp.query_group.size() != qg.rows.size())
        throw std::logic_error("attention_forward: plan lacks kernel groups");
      const auto& b = p.at(h, static_cast<int>(c));
      int qrows = static_cast<int>(qg.rows.size());
      Var v = ad::matmul(t, ad::gather_rows(t, x, &kg.rows), t.param(b.w_v));
      Var agg;
      if (p.force_unit_alpha) {
        agg = ad::gather_scatter(t, v, nullptr, &cp.pairs, qrows);
      } else {
        Var q = linear_forward(t, b.query, x, plan.query_plans[cp.query_pattern]);
        Var k = linear_forward(t, b.key, x, plan.key_plans[cp.key_pattern]);
        if (p.kernel.kind == KernelKind::Softmax) {
          Var s = ad::pair_dot(t, q, k, &cp.pairs, nullptr, nullptr, scale);
          Var alpha = ad::segment_softmax(t, s, &cp.offsets);
          agg = ad::gather_scatter(t, v, alpha, &cp.pairs, qrows);
        } else {
          agg = ad::kernel_aggregate(t, features(t, p, q), features(t, p, k), v, &cp.key_group, &cp.query_group,
                                     cp.groups, p.normalize);
        }
      }
      if (train) agg = ad::dropout(t, agg, p.dropout);
      Var y = ad::scatter_add_rows(t, ad::matmul(t, agg, t.param(b.w_o)), &qg.rows, plan.out_rows);
      acc = acc ? ad::add(t, acc, y) : y;
    }
  }
  if (!acc) acc = t.constant(Matrix(plan.out_rows, p.d_out));
  return acc;
}

SparseTensor attn_sparse(const SparseTensor& s, const EdgeSet& eout, const AttentionParams& p) {
  s.validate();
  if (s.k() != p.k || eout.k != p.l || s.d() != p.d_in) throw std::invalid_argument("attn_sparse: shape mismatch");
  AttentionPlan plan = build_attention_plan(s.edges, eout, p.classes, plan_options(p));
  Tape t(false);
  Var y = attention_forward(t, p, t.constant(s.values), plan, false);
  SparseTensor out;
  out.edges = eout;
  out.values = std::move(y->value);
  return out;
}

SparseTensor attn_kernel(const SparseTensor& s, const EdgeSet& eout, const AttentionParams& p) {
  if (p.kernel.kind == KernelKind::Softmax || p.force_unit_alpha)
    throw std::invalid_argument("attn_kernel: requires a feature-map kernel");
  return attn_sparse(s, eout, p);
}

DenseTensor attn_kernel(const DenseTensor& a, const AttentionParams& p) {
  auto s = sparsify(a, EdgeSet::full_grid(a.n, a.k));
  return densify(attn_kernel(s, EdgeSet::full_grid(a.n, p.l), p));
}

std::vector<Matrix> merged_value_output(const AttentionParams& p) {
  std::vector<Matrix> w;
  for (std::size_t c = 0; c < p.classes.size(); ++c) {
    Matrix m(p.d_in, p.d_out);
    for (int h = 0; h < p.H; ++h) add_inplace(m, matmul(p.at(h, static_cast<int>(c)).w_v, p.at(h, static_cast<int>(c)).w_o));
    w.push_back(std::move(m));
  }
  return w;
}

}  // namespace hot
