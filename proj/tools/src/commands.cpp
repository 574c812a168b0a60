#include <algorithm>
#include <chrono>
#include <cmath>
#include <new>
#include <random>
#include <stdexcept>

#include "hot/cli.hpp"
#include "hot/experiments.hpp"
#include "hot/memory_stats.hpp"
#include "hot/rng.hpp"

namespace hot::cli {

namespace {

ModelSpec bench_spec(KernelKind kernel, int width) {
  LayerSpec enc;
  enc.k = 2;
  enc.l = 2;
  enc.d_in = width;
  enc.d_out = width;
  enc.d_H = 8;
  enc.H = 4;
  enc.kernel = kernel;
  enc.d_K = 32;
  ModelSpec s;
  s.layers.assign(4, enc);
  LayerSpec head = enc;
  head.l = 0;
  s.layers.push_back(head);
  s.final_norm = true;
  s.out_dim = width;
  return s;
}

// (query, key) pairs touched by dense attention over all layers and heads.
std::uint64_t dense_pair_count(const Model& m, int n) {
  std::uint64_t total = 0;
  for (const auto& layer : m.layers) {
    std::uint64_t per_head = 0;
    for (const auto& mu : layer.attn.classes) {
      std::uint64_t outs = 1;
      for (int t = 0; t < mu.u_q; ++t) outs *= static_cast<std::uint64_t>(std::max(0, n - t));
      per_head += outs * ClassShape(mu).members_per_output(n);
    }
    total += per_head * static_cast<std::uint64_t>(layer.attn.H);
  }
  return total;
}

struct MlpPi {
  std::vector<LinearEquivariant> layers;
};

MlpPi make_mlp_pi(int width, std::uint64_t seed) {
  MlpPi m;
  for (int t = 0; t < 5; ++t) {
    m.layers.push_back(LinearEquivariant::make(2, t < 4 ? 2 : 0, width, width, ClassSetMode::Full));
    init_params(m.layers.back(), derive_seed(seed, {static_cast<std::uint64_t>(t)}));
  }
  return m;
}

DenseTensor mlp_pi_forward(const MlpPi& m, DenseTensor a) {
  for (std::size_t t = 0; t < m.layers.size(); ++t) {
    a = forward_dense(m.layers[t], a);
    if (t + 1 < m.layers.size())
      for (auto& v : a.values) v = std::max(0.0, v);
  }
  return a;
}

std::size_t default_cap(const std::string& impl) {
  return impl == "dense" || impl == "mlp-pi" ? (std::size_t{1} << 30) : (std::size_t{5} << 29);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

SparseTensor bench_input(long m, int width, std::uint64_t seed) {
  int n = ba_nodes_for_entries(m);
  Graph g = ba_random_graph(n, 5, seed);
  std::vector<int> flat;
  for (auto& ed : g.edges) flat.insert(flat.end(), ed.begin(), ed.end());
  EdgeSet e = add_self_loops(EdgeSet::from_tuples(n, 2, std::move(flat)));
  SparseTensor s{e, Matrix(e.size(), width)};
  std::mt19937_64 rng(derive_seed(seed, {0x1a}));
  std::normal_distribution<double> nd;
  for (auto& v : s.values.v) v = nd(rng);
  return s;
}

}  // namespace

std::vector<std::string> bench_impls() { return {"dense", "mlp-pi", "sparse", "sparse-kernel"}; }

int ba_nodes_for_entries(long m) {
  // attach 5 with loops: 2*5*(n-5) + n entries
  return std::max(6, static_cast<int>(std::lround((m + 50) / 11.0)));
}

std::vector<BenchRow> run_bench(const BenchOptions& opt, const std::function<void(const BenchRow&)>& on_row) {
  auto impls = bench_impls();
  if (std::find(impls.begin(), impls.end(), opt.impl) == impls.end())
    throw std::invalid_argument("unknown bench impl '" + opt.impl + "'");
  if (opt.reps < 1 || opt.warmup < 0) throw std::invalid_argument("bench: reps must be positive");
  bool dense = opt.impl == "dense" || opt.impl == "mlp-pi";
  KernelKind kernel = opt.impl == "sparse-kernel" ? KernelKind::Performer : KernelKind::Softmax;
  std::size_t cap = opt.cap_bytes ? opt.cap_bytes : default_cap(opt.impl);
  std::vector<BenchRow> rows;
  for (long size : opt.sizes) {
    BenchRow row;
    row.impl = opt.impl;
    if (dense) {
      row.n = static_cast<int>(size);
      row.m = size * size;
    } else {
      row.n = ba_nodes_for_entries(size);
    }
    std::vector<double> times;
    try {
      for (int rep = 0; rep < opt.warmup + opt.reps; ++rep) {
        std::uint64_t seed = derive_seed(opt.seed, {static_cast<std::uint64_t>(size), static_cast<std::uint64_t>(rep)});
        std::size_t base, peak;
        double ms;
        if (dense) {
          std::mt19937_64 rng(seed);
          auto a = DenseTensor::random(row.n, 2, opt.width, rng);
          Model model;
          MlpPi mlp;
          if (opt.impl == "dense") model = build_model(bench_spec(KernelKind::Softmax, opt.width), seed);
          else mlp = make_mlp_pi(opt.width, seed);
          memory::ScopedCap guard(memory::current_bytes() + cap);
          base = memory::current_bytes();
          memory::reset_peak();
          auto t0 = std::chrono::steady_clock::now();
          auto out = opt.impl == "dense" ? model_forward(model, a) : mlp_pi_forward(mlp, a);
          ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
          peak = memory::peak_bytes();
          row.work = opt.impl == "dense" ? dense_pair_count(model, row.n) : ipow(row.n, 4) * mlp.layers.size();
        } else {
          auto s = bench_input(size, opt.width, seed);
          row.m = s.m();
          Model model = build_model(bench_spec(kernel, opt.width), seed);
          memory::ScopedCap guard(memory::current_bytes() + cap);
          base = memory::current_bytes();
          memory::reset_peak();
          auto t0 = std::chrono::steady_clock::now();
          ModelPlan plan = plan_model(model, s.edges);
          Tape t(false);
          Var y = model_forward(t, model, t.constant(s.values), plan, false);
          ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
          peak = memory::peak_bytes();
          std::uint64_t work = 0;
          for (auto& lp : plan.layers) work += kernel == KernelKind::Softmax ? lp.attn.pair_count() : lp.attn.kernel_work();
          row.work = work;
        }
        if (rep >= opt.warmup) {
          times.push_back(ms);
          row.peak_bytes = std::max(row.peak_bytes, peak > base ? peak - base : 0);
        }
      }
      row.forward_ms_median = median(times);
    } catch (const std::bad_alloc&) {
      row.oom = true;
      row.forward_ms_median = NAN;
      row.peak_bytes = cap;
    }
    rows.push_back(row);
    if (on_row) on_row(row);
    if (row.oom) break;
  }
  return rows;
}

MpnnEquivResult mpnn_equiv(int n, std::uint64_t seed, const std::string& graph, bool self_loops) {
  if (n < 1) throw std::invalid_argument("mpnn-equiv: n must be positive");
  const int dv = 3, de = 2, dm = 4, d = 3;
  std::mt19937_64 rng(derive_seed(seed, {0x3b}));
  auto oracle = MPNNOracle::affine(dv, de, dm, d, AffineMap::random(dm, 2 * dv + de, rng),
                                   AffineMap::random(d, dv + dm, rng));
  std::vector<std::array<int, 2>> und;
  if (graph == "path") {
    for (int i = 0; i + 1 < n; ++i) und.push_back({i, i + 1});
  } else if (graph == "disconnected") {
    int h = n / 2;
    for (int i = 0; i + 1 < n; ++i)
      if (i + 1 != h) und.push_back({i, i + 1});
  } else if (graph == "random") {
    std::bernoulli_distribution coin(0.35);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (coin(rng)) und.push_back({a, b});
  } else {
    throw std::invalid_argument("unknown graph kind '" + graph + "'");
  }
  Graph g = make_undirected(n, und, de);
  std::normal_distribution<double> nd;
  for (auto& v : g.edge_features.v) v = nd(rng);
  Matrix x(n, dv);
  for (auto& v : x.v) v = nd(rng);

  Model m = mpnn_emulation_weights(oracle);
  auto out = model_forward(m, mpnn_pack(x, g, self_loops));
  Matrix h = mpnn_oracle_forward(oracle, x, g);
  EdgeIndex ix(out.edges);
  MpnnEquivResult res;
  res.n = n;
  res.edges = static_cast<long>(g.edges.size());
  for (int j = 0; j < n; ++j) {
    int t[2] = {j, j};
    int r = ix.find(t);
    if (r < 0) {
      res.max_dev = INFINITY;
      break;
    }
    for (int c = 0; c < d; ++c) res.max_dev = std::max(res.max_dev, std::abs(out.values(r, c) - h(j, c)));
  }
  return res;
}

}  // namespace hot::cli
