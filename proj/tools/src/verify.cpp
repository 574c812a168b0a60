#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "hot/cli.hpp"
#include "hot/experiments.hpp"
#include "hot/rng.hpp"

namespace hot::cli {

namespace {

// Literal layer sum: every (i, j) pair, its class, its weight.
DenseTensor naive_linear(const LinearEquivariant& L, const DenseTensor& a) {
  DenseTensor out(a.n, L.l, L.d_out);
  auto lam = enumerate_classes(L.l);
  std::vector<int> i(L.k), j(L.l), ij(L.k + L.l);
  for (std::size_t jf = 0; jf < out.positions(); ++jf) {
    out.unflat(jf, j.data());
    double* o = out.at(jf);
    int brow = 0;
    if (L.l > 0) brow = static_cast<int>(std::find(lam.begin(), lam.end(), pattern_of(j)) - lam.begin());
    for (int c = 0; c < L.d_out; ++c) o[c] = L.bias(brow, c);
    for (std::size_t f = 0; f < a.positions(); ++f) {
      a.unflat(f, i.data());
      std::copy(i.begin(), i.end(), ij.begin());
      std::copy(j.begin(), j.end(), ij.begin() + L.k);
      int c = L.class_index(pattern_of(ij));
      if (c < 0) continue;
      const double* x = a.at(f);
      for (int r = 0; r < L.d_in; ++r)
        for (int s = 0; s < L.d_out; ++s) o[s] += x[r] * L.weights[c](r, s);
    }
  }
  return out;
}

LinearEquivariant random_linear(int k, int l, int din, int dout, std::uint64_t seed,
                                ClassSetMode mode = ClassSetMode::Full) {
  auto L = LinearEquivariant::make(k, l, din, dout, mode);
  init_params(L, seed);
  std::mt19937_64 rng(seed ^ 0xb1a5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& b : L.bias.v) b = u(rng);
  return L;
}

void randomize_norms(EncoderLayer& e, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto* ln : {&e.ln1, &e.ln2}) {
    for (auto& g : ln->gamma.v) g = u(rng);
    for (auto& b : ln->beta.v) b = u(rng) - 1.0;
  }
  for (auto* m : {&e.mlp1, &e.mlp2})
    for (auto& b : m->bias.v) b = u(rng) - 1.0;
}

Graph random_graph(int n, double p, int d_e, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<std::array<int, 2>> und;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (coin(rng)) und.push_back({a, b});
  Graph g = make_undirected(n, und, d_e);
  std::normal_distribution<double> nd;
  for (auto& v : g.edge_features.v) v = nd(rng);
  return g;
}

double max_abs(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return INFINITY;
  return max_abs_diff(a, b);
}

void suite_equivariance(const VerifyOptions& o, RunReport& r) {
  double lin = 0, inv = 0, enc = 0, sp = 0;
  for (int trial = 0; trial < 2; ++trial) {
    std::uint64_t seed = derive_seed(o.seed, {1, static_cast<std::uint64_t>(trial)});
    std::mt19937_64 rng(seed);
    for (int k = 1; k <= 3; ++k)
      for (int l = 0; l <= 3; ++l)
        for (int n : {3, 4}) {
          if (k + l > 5 && n > 3) continue;
          auto L = random_linear(k, l, 2, 2, derive_seed(seed, {static_cast<std::uint64_t>(10 * k + l)}));
          auto A = DenseTensor::random(n, k, 2, rng);
          auto p = NodePermutation::random(n, rng);
          double dev = max_abs_diff(forward_dense(L, apply_permutation(A, p)), apply_permutation(forward_dense(L, A), p));
          (l == 0 ? inv : lin) = std::max(l == 0 ? inv : lin, dev);
        }
    for (int k = 1; k <= 2; ++k)
      for (int l = 0; l <= 2; ++l) {
        LayerSpec ls;
        ls.k = k;
        ls.l = l;
        ls.d_in = 3;
        ls.d_out = 3;
        ls.d_H = 2;
        ls.H = 2;
        auto e = EncoderLayer::make(ls, derive_seed(seed, {static_cast<std::uint64_t>(100 + 10 * k + l)}));
        randomize_norms(e, rng);
        auto A = DenseTensor::random(4, k, 3, rng);
        auto p = NodePermutation::random(4, rng);
        enc = std::max(enc, max_abs_diff(enc_forward(e, apply_permutation(A, p)), apply_permutation(enc_forward(e, A), p)));
      }
    for (KernelKind kk : {KernelKind::Softmax, KernelKind::Performer, KernelKind::Elu1}) {
      auto spec = chain_model_spec(kk, 6);
      spec.layers[0].d_in = 4;
      spec.layers[0].H = 2;
      spec.layers[0].d_H = 3;
      Model m = build_model(spec, seed);
      Graph g = random_graph(6, 0.4, 2, rng);
      Matrix x(6, 2);
      for (auto& v : x.v) v = std::normal_distribution<double>()(rng);
      auto S = encode_graph(x, g);
      auto p = NodePermutation::random(6, rng);
      auto lhs = model_forward(m, apply_permutation(S, p));
      auto rhs = apply_permutation(model_forward(m, S), p);
      sp = std::max(sp, lhs.edges == rhs.edges ? max_abs(lhs.values, rhs.values) : INFINITY);
    }
  }
  r.expect_le("equivariance", "linear_dense", lin, 1e-10);
  r.expect_le("equivariance", "linear_invariant", inv, 1e-10);
  r.expect_le("equivariance", "encoder_dense", enc, 1e-9);
  r.expect_le("equivariance", "model_sparse", sp, 1e-9);
}

void suite_oracle(const VerifyOptions& o, RunReport& r) {
  std::mt19937_64 rng(derive_seed(o.seed, {2}));
  double dev = 0;
  for (int k = 1; k <= 2; ++k)
    for (int l = 0; l <= 2; ++l) {
      auto L = random_linear(k, l, 2, 3, rng());
      auto A = DenseTensor::random(3, k, 2, rng);
      dev = std::max(dev, max_abs_diff(forward_dense(L, A), naive_linear(L, A)));
    }
  r.expect_le("oracle", "dense_vs_exhaustive", dev, 1e-12);

  // DeepSets: I A w1 + 1 1^T A w2 + 1 b^T with w1 = w_{i=j} - w_{i!=j}, w2 = w_{i!=j}
  auto L = random_linear(1, 1, 3, 2, rng());
  int n = 5;
  auto A = DenseTensor::random(n, 1, 3, rng);
  const Matrix& weq = L.weights[L.class_index(Partition({0, 0}))];
  const Matrix& wne = L.weights[L.class_index(Partition({0, 1}))];
  Matrix X(n, 3);
  X.v = A.values;
  Matrix pooled(1, 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) pooled.v[c] += X(i, c);
  Matrix w1 = weq;
  add_inplace(w1, wne, -1.0);
  Matrix xw1 = matmul(X, w1), pw2 = matmul(pooled, wne);
  auto out = forward_dense(L, A);
  double ds = 0;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) ds = std::max(ds, std::abs(out.at(i)[c] - (xw1(i, c) + pw2.v[c] + L.bias(0, c))));
  r.expect_le("oracle", "deepsets_identity", ds, 1e-12);

  double lw = 0;
  for (auto [k, l] : {std::pair{1, 1}, std::pair{1, 2}, std::pair{2, 2}, std::pair{2, 1}}) {
    auto light = random_linear(k, l, 2, 2, rng(), ClassSetMode::Lightweight);
    auto full = LinearEquivariant::make(k, l, 2, 2, ClassSetMode::Full);
    for (std::size_t c = 0; c < light.classes.size(); ++c)
      full.weights[full.class_index(light.classes[c].part)] = light.weights[c];
    full.bias = light.bias;
    auto B = DenseTensor::random(4, k, 2, rng);
    lw = std::max(lw, max_abs_diff(forward_lightweight(light, B), forward_dense(full, B)));
  }
  r.expect_le("oracle", "lightweight_vs_zero_padded", lw, 1e-12);
}

void suite_sparse(const VerifyOptions& o, RunReport& r) {
  std::mt19937_64 rng(derive_seed(o.seed, {3}));
  int n = 4;
  auto A = DenseTensor::random(n, 2, 3, rng);
  auto full = EdgeSet::full_grid(n, 2);
  auto S = sparsify(A, full);
  auto L = random_linear(2, 2, 3, 2, rng());
  double lin = max_abs_diff(densify(forward_sparse(L, S, full)), forward_dense(L, A));
  auto L1 = random_linear(2, 1, 3, 2, rng());
  lin = std::max(lin, max_abs_diff(densify(forward_sparse(L1, S, EdgeSet::full_grid(n, 1))), forward_dense(L1, A)));
  r.expect_le("sparse", "linear_full_grid", lin, 1e-10);

  double att = 0, ker = 0;
  for (int l : {1, 2}) {
    auto P = AttentionParams::make(2, l, 3, 3, 2, 2, KernelMap::make(KernelKind::Softmax, 1, 2, 0), {}, rng());
    att = std::max(att, max_abs_diff(densify(attn_sparse(S, EdgeSet::full_grid(n, l), P)), attn_dense(A, P)));
    auto Q = AttentionParams::make(2, l, 3, 3, 2, 2, KernelMap::make(KernelKind::Performer, 16, 2, rng()), {}, rng());
    ker = std::max(ker, max_abs_diff(densify(attn_kernel(S, EdgeSet::full_grid(n, l), Q)), attn_kernel(A, Q)));
  }
  r.expect_le("sparse", "softmax_attention_full_grid", att, 1e-10);
  r.expect_le("sparse", "kernel_attention_full_grid", ker, 1e-10);

  // structural zeros: an empty input yields pure bias rows
  SparseTensor empty{EdgeSet(n, 2), Matrix(0, 3)};
  auto eo = EdgeSet::full_grid(n, 2);
  auto b = forward_sparse(L, empty, eo);
  double bias_dev = 0;
  for (int row = 0; row < b.m(); ++row)
    for (int c = 0; c < 2; ++c) bias_dev = std::max(bias_dev, std::abs(b.values(row, c) - L.bias(bias_row(eo.tuple(row), 2), c)));
  r.expect_le("sparse", "empty_input_bias_field", bias_dev, 0.0);

  if (!o.dump.empty()) {
    save_snapshot(o.dump + ".in.hott", S);
    save_snapshot(o.dump + ".out.hott", forward_sparse(L, S, full));
  }
}

bool key_set_j_independent(const EquivalenceClass& mu) {
  bool in_only = false, out_only = false;
  for (int b = 0; b < mu.part.blocks(); ++b) {
    bool in = false, out = false;
    for (int t = 0; t < mu.k + mu.l; ++t)
      if (mu.part.rgs[t] == b) (t < mu.k ? in : out) = true;
    in_only |= in && !out;
    out_only |= out && !in;
  }
  return !(in_only && out_only);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

void suite_kernel(const VerifyOptions& o, RunReport& r) {
  std::mt19937_64 rng(derive_seed(o.seed, {4}));
  auto km = KernelMap::make(KernelKind::Performer, 64, 3, rng());
  Matrix f0 = kernel_features(Matrix(2, 3), km);
  double dev0 = 0, minf = INFINITY;
  for (double v : f0.v) dev0 = std::max(dev0, std::abs(v - 1.0 / std::sqrt(64.0)));
  Matrix x(20, 3);
  for (auto& v : x.v) v = std::normal_distribution<double>()(rng);
  for (double v : kernel_features(x, km, 1.0, true).v) minf = std::min(minf, v);
  r.expect_le("kernel", "zero_input_features", dev0, 1e-15);
  r.expect("kernel", "features_positive", minf > 0);

  double exact = 0;
  for (int l : {0, 1, 2}) {
    auto P = AttentionParams::make(2, l, 3, 3, 2, 3, KernelMap::make(KernelKind::Performer, 32, 3, rng()), {}, rng());
    P.filter_classes(key_set_j_independent);
    auto A = DenseTensor::random(4, 2, 3, rng);
    exact = std::max(exact, max_abs_diff(attn_kernel(A, P), attn_dense(A, P)));
  }
  r.expect_le("kernel", "decoupled_equals_coupled", exact, 1e-12);

  std::vector<double> d32, d512;
  for (int s = 0; s < 5; ++s) {
    std::uint64_t seed = derive_seed(o.seed, {4, static_cast<std::uint64_t>(s)});
    auto base = AttentionParams::make(2, 2, 3, 3, 1, 4, KernelMap::make(KernelKind::Softmax, 1, 4, 0), {}, seed);
    std::mt19937_64 g(seed);
    auto A = DenseTensor::random(6, 2, 3, g);
    auto ref = attn_dense(A, base);
    for (int dk : {32, 512}) {
      auto P = base;
      P.kernel = KernelMap::make(KernelKind::Performer, dk, 4, derive_seed(seed, {static_cast<std::uint64_t>(dk)}));
      auto out = attn_dense(A, P);
      double sum = 0;
      for (std::size_t t = 0; t < out.values.size(); ++t) sum += std::abs(out.values[t] - ref.values[t]);
      (dk == 32 ? d32 : d512).push_back(sum / out.values.size());
    }
  }
  double m32 = median(d32), m512 = median(d512);
  r.metrics["kernel_median_dev_dK32"] = m32;
  r.metrics["kernel_median_dev_dK512"] = m512;
  r.expect("kernel", "fidelity_improves_with_dK", m512 < m32,
           "median deviation " + std::to_string(m32) + " -> " + std::to_string(m512));
}

void suite_thm1(const VerifyOptions& o, RunReport& r) {
  std::mt19937_64 rng(derive_seed(o.seed, {5}));
  double dev = 0;
  for (int k = 1; k <= 2; ++k)
    for (int l = 0; l <= 2; ++l)
      for (int n : {3, 5}) {
        LayerSpec ls;
        ls.k = k;
        ls.l = l;
        ls.d_in = 3;
        ls.d_out = 2;
        ls.d_H = 3;
        ls.H = 2;
        auto e = EncoderLayer::make(ls, rng());
        randomize_norms(e, rng);
        reduce_to_linear(e);
        auto A = DenseTensor::random(n, k, 3, rng);
        dev = std::max(dev, max_abs_diff(enc_forward(e, A), forward_dense(equivalent_linear(e), A)));
      }
  r.expect_le("thm1", "reduction_equals_linear", dev, 1e-12);
  if (!o.golden.empty()) {
    Golden g = read_golden(o.golden);
    auto out = golden_output(g);
    r.expect_le("thm1", "golden_snapshot", out.n == g.expected.n && out.k == g.expected.k && out.d == g.expected.d ? max_abs_diff(out, g.expected) : INFINITY, 1e-12);
    EncoderLayer e = g.model.layers[0];
    reduce_to_linear(e);
    r.expect_le("thm1", "golden_linear", max_abs_diff(out, forward_dense(equivalent_linear(e), g.input)), 1e-12);
  }
}

void suite_thm2(const VerifyOptions& o, RunReport& r) {
  double worst = 0;
  for (int t = 0; t < 5; ++t) {
    std::uint64_t s = derive_seed(o.seed, {6, static_cast<std::uint64_t>(t)});
    worst = std::max(worst, mpnn_equiv(3 + static_cast<int>(s % 8), s, "random", true).max_dev);
  }
  worst = std::max(worst, mpnn_equiv(6, o.seed, "path", true).max_dev);
  worst = std::max(worst, mpnn_equiv(8, o.seed, "disconnected", true).max_dev);
  r.metrics["thm2_max_dev"] = worst;
  r.expect_le("thm2", "emulation_matches_oracle", worst, 1e-6);
  double ctrl = mpnn_equiv(6, o.seed, "path", false).max_dev;
  r.expect("thm2", "negative_control_without_self_loops_fails", !(ctrl <= 1e-4));
}

void suite_prop1(const VerifyOptions& o, RunReport& r) {
  std::mt19937_64 rng(derive_seed(o.seed, {7}));
  int n = 4;
  auto A = DenseTensor::random(n, 2, 3, rng);
  double dev = 0;
  for (auto& mu : all_classes(2, 2))
    for (auto role : {CompactRole::Query, CompactRole::Key}) {
      const Partition& target = role == CompactRole::Query ? mu.mu_q : mu.mu_k;
      auto full = LinearEquivariant::make(2, 2, 3, 2, ClassSetMode::Explicit, effective_classes(2, target));
      init_params(full, rng());
      for (auto& b : full.bias.v) b = std::uniform_real_distribution<double>(-1, 1)(rng);
      auto Q = forward_dense(full, A);
      auto cl = construct_compact(full, mu, role);
      auto Qc = forward_dense(cl.layer, A);
      int j[2];
      for (std::size_t f = 0; f < Q.positions(); ++f) {
        Q.unflat(f, j);
        if (pattern_of(std::span<const int>(j, 2)) != target) continue;
        auto ci = compact_index(cl.map, std::span<const int>(j, 2));
        const double* a = Q.at(f);
        const double* b = Qc.at(std::span<const int>(ci));
        for (int c = 0; c < 2; ++c) dev = std::max(dev, std::abs(a[c] - b[c]));
      }
    }
  r.expect_le("prop1", "compact_query_key", dev, 1e-12);
}

void suite_prop5(const VerifyOptions& o, RunReport& r) {
  std::mt19937_64 rng(derive_seed(o.seed, {8}));
  double dev = 0;
  for (int k : {2, 3}) {
    int n = 5;
    auto sub = LinearEquivariant::make(1, k, 3, 2, ClassSetMode::Explicit, uniform_1_to_k_subset(k));
    init_params(sub, rng());
    for (auto& b : sub.bias.v) b = std::uniform_real_distribution<double>(-1, 1)(rng);
    auto full = LinearEquivariant::make(1, k, 3, 2, ClassSetMode::Full);
    for (std::size_t c = 0; c < sub.classes.size(); ++c) full.weights[full.class_index(sub.classes[c].part)] = sub.weights[c];
    full.bias = sub.bias;
    auto A = DenseTensor::random(n, 1, 3, rng);
    auto a = forward_dense(full, A), b = forward_uniform_1_to_k(sub, A);
    std::vector<int> j(k);
    for (std::size_t f = 0; f < a.positions(); ++f) {
      a.unflat(f, j.data());
      if (pattern_of(j).blocks() != k) continue;
      for (int c = 0; c < 2; ++c) dev = std::max(dev, std::abs(a.at(f)[c] - b.at(f)[c]));
    }
  }
  r.expect_le("prop5", "uniform_1_to_k_vs_full", dev, 1e-12);
}

Matrix rand_matrix(int r, int c, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  Matrix m(r, c);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : m.v) v = u(rng);
  return m;
}

void suite_gradient(const VerifyOptions& o, RunReport& r) {
  std::mt19937_64 rng(derive_seed(o.seed, {9}));
  Matrix a = rand_matrix(4, 3, rng), b = rand_matrix(3, 5, rng), c = rand_matrix(4, 3, rng), row = rand_matrix(1, 3, rng);
  Matrix q = rand_matrix(3, 4, rng), k = rand_matrix(5, 4, rng), pos1 = rand_matrix(3, 4, rng, 0.5, 1.5),
         pos2 = rand_matrix(5, 4, rng, 0.5, 1.5), v = rand_matrix(5, 2, rng), g = rand_matrix(1, 3, rng, 0.5, 1.5);
  Matrix s = rand_matrix(7, 1, rng), z = rand_matrix(4, 1, rng);
  Matrix kinked = rand_matrix(4, 3, rng);
  for (auto& x : kinked.v) x = (x < 0 ? -0.2 : 0.2) + x;
  Matrix wproj = rand_matrix(6, 3, rng);
  Matrix b2 = rand_matrix(3, 5, rng), bias2 = rand_matrix(2, 5, rng);
  std::vector<int> gidx2{1, -1, 3, 0, 0, 2}, bidx{0, 1, 1, -1, 0, 1};
  std::vector<int> gidx{2, 0, -1, 3, 1, 2}, sidx{1, 0, 1, -1};
  PairList pairs{{0, 4, 2, 1, 3, 0, 2}, {0, 0, 1, 1, 1, 2, 2}};
  std::vector<int> zero4(4, 0), offs{0, 2, 5, 7}, kgrp{0, 1, 0, 1, 1}, qgrp{1, 0, 1}, labels{0, 1, 1, 0}, cls3{0, 2, 1, 2};

  auto proj = [&](Tape& t, const Var& out) {
    std::mt19937_64 fixed(77);
    return ad::sum(t, ad::mul(t, out, t.constant(rand_matrix(out->value.rows, out->value.cols, fixed))));
  };
  using Fn = std::function<Var(Tape&)>;
  std::vector<std::tuple<std::string, Fn, std::vector<Matrix*>>> prims = {
      {"matmul", [&](Tape& t) { return proj(t, ad::matmul(t, t.param(a), t.param(b))); }, {&a, &b}},
      {"add", [&](Tape& t) { return proj(t, ad::add(t, t.param(a), t.param(c))); }, {&a, &c}},
      {"sub", [&](Tape& t) { return proj(t, ad::sub(t, t.param(a), t.param(c))); }, {&a, &c}},
      {"add_row", [&](Tape& t) { return proj(t, ad::add_row(t, t.param(a), t.param(row))); }, {&a, &row}},
      {"scale", [&](Tape& t) { return proj(t, ad::scale(t, t.param(a), -1.7)); }, {&a}},
      {"mul", [&](Tape& t) { return proj(t, ad::mul(t, t.param(a), t.param(c))); }, {&a, &c}},
      {"gather_rows", [&](Tape& t) { return proj(t, ad::gather_rows(t, t.param(a), &gidx)); }, {&a}},
      {"gather_linear",
       [&](Tape& t) {
         return proj(t, ad::gather_linear(t, t.param(a), {&gidx, &gidx2}, {t.param(b), t.param(b2)}, t.param(bias2),
                                          &bidx, 6));
       },
       {&a, &b, &b2, &bias2}},
      {"scatter_add_rows", [&](Tape& t) { return proj(t, ad::scatter_add_rows(t, t.param(a), &sidx, 3)); }, {&a}},
      {"gather_scatter", [&](Tape& t) { return proj(t, ad::gather_scatter(t, t.param(v), t.param(s), &pairs, 3)); },
       {&v, &s}},
      {"pair_dot", [&](Tape& t) { return proj(t, ad::pair_dot(t, t.param(q), t.param(k), &pairs, nullptr, nullptr, 0.5)); },
       {&q, &k}},
      {"segment_softmax", [&](Tape& t) { return proj(t, ad::segment_softmax(t, t.param(s), &offs)); }, {&s}},
      {"performer_features",
       [&](Tape& t) { return proj(t, ad::performer_features(t, t.param(a), &wproj, 0.8, false)); }, {&a}},
      {"performer_shifted_ratio",
       [&](Tape& t) {
         Var fq = ad::performer_features(t, t.param(a), &wproj, 0.8, true);
         Var fk = ad::performer_features(t, t.param(c), &wproj, 0.8, true);
         std::vector<int>* g4 = &zero4;
         return proj(t, ad::kernel_aggregate(t, fq, fk, t.param(c), g4, g4, 1, true));
       },
       {&a, &c}},
      {"elu1", [&](Tape& t) { return proj(t, ad::elu1(t, t.param(kinked))); }, {&kinked}},
      {"kernel_aggregate_normalized",
       [&](Tape& t) {
         return proj(t, ad::kernel_aggregate(t, t.param(pos1), t.param(pos2), t.param(v), &kgrp, &qgrp, 2, true));
       },
       {&pos1, &pos2, &v}},
      {"kernel_aggregate",
       [&](Tape& t) {
         return proj(t, ad::kernel_aggregate(t, t.param(pos1), t.param(pos2), t.param(v), &kgrp, &qgrp, 2, false));
       },
       {&pos1, &pos2, &v}},
      {"layer_norm", [&](Tape& t) { return proj(t, ad::layer_norm(t, t.param(a), t.param(g), t.param(row))); },
       {&a, &g, &row}},
      {"batch_norm", [&](Tape& t) { return proj(t, ad::batch_norm(t, t.param(a), t.param(g), t.param(row))); },
       {&a, &g, &row}},
      {"gelu", [&](Tape& t) { return proj(t, ad::gelu(t, t.param(a))); }, {&a}},
      {"relu", [&](Tape& t) { return proj(t, ad::relu(t, t.param(kinked))); }, {&kinked}},
      {"concat_cols", [&](Tape& t) { return proj(t, ad::concat_cols(t, {t.param(a), t.param(c)})); }, {&a, &c}},
      {"slice_cols", [&](Tape& t) { return proj(t, ad::slice_cols(t, t.param(a), 1, 3)); }, {&a}},
      {"softmax_cross_entropy", [&](Tape& t) { return ad::softmax_cross_entropy(t, t.param(a), &cls3); }, {&a}},
      {"bce_with_logits", [&](Tape& t) { return ad::bce_with_logits(t, t.param(z), &labels); }, {&z}},
  };
  double worst = 0;
  std::string worst_name;
  for (auto& [name, fn, pts] : prims) {
    auto res = fd_check(fn, pts);
    if (res.max_rel_err > worst) {
      worst = res.max_rel_err;
      worst_name = name;
    }
  }
  r.metrics["gradient_worst_primitive"] = worst_name;
  r.expect_le("gradient", "primitives", worst, 1e-6, worst_name);

  Chain chain = make_chain(5, 1, 0);
  // random values keep attention scores distinct
  for (auto& x : chain.tensor.values.v) x = std::normal_distribution<double>()(rng);
  auto spec = chain_model_spec(KernelKind::Softmax, 6);
  spec.layers.erase(spec.layers.begin());
  spec.layers[0].d_in = 3;
  Model m = build_model(spec, o.seed);
  for (auto* ln : {&m.layers[0].ln1, &m.layers[0].ln2, &m.final_ln}) {
    for (auto& x : ln->gamma.v) x = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
    for (auto& x : ln->beta.v) x = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  }
  auto plan = plan_model(m, chain.tensor.edges);
  std::vector<int> lab(chain.n, chain.label);
  auto res = fd_check(
      [&](Tape& t) {
        return chain_loss(t, model_forward(t, m, t.constant(chain.tensor.values), plan, false), &lab, LossKind::Bce);
      },
      m.parameters(), 6, o.seed);
  r.metrics["gradient_chain_unresolved_entries"] = res.unresolved;
  r.expect_le("gradient", "encoder_chain_loss", res.max_rel_err_resolved, 1e-4, res.worst_resolved);
  r.expect_le("gradient", "encoder_chain_loss_noise_level_entries", res.max_abs_err_unresolved, 1e-9);
}

}  // namespace

const std::vector<std::pair<std::string, Suite>>& suites() {
  static const std::vector<std::pair<std::string, Suite>> reg = {
      {"equivariance", suite_equivariance}, {"oracle", suite_oracle}, {"sparse", suite_sparse},
      {"kernel", suite_kernel},             {"thm1", suite_thm1},     {"thm2", suite_thm2},
      {"prop1", suite_prop1},               {"prop5", suite_prop5},   {"gradient", suite_gradient}};
  return reg;
}

bool run_suite(const std::string& name, const VerifyOptions& opt, RunReport& report) {
  for (auto& [n, fn] : suites())
    if (n == name || name == "all") {
      PhaseTimer t(report, n);
      try {
        fn(opt, report);
      } catch (const std::exception& e) {
        report.expect(n, "completed", false, e.what());
      }
      if (name != "all") return true;
    }
  return name == "all";
}

}  // namespace hot::cli
