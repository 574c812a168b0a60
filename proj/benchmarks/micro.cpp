#include <benchmark/benchmark.h>

#include <random>

#include "hot/attention.hpp"
#include "hot/encoder.hpp"
#include "hot/experiments.hpp"

using namespace hot;

namespace {

SparseTensor graph_input(int n, int width, std::uint64_t seed) {
  Graph g = ba_random_graph(n, 5, seed);
  SparseTensor s;
  std::vector<int> flat;
  for (auto& e : g.edges) flat.insert(flat.end(), {e[0], e[1]});
  s.edges = add_self_loops(EdgeSet::from_tuples(n, 2, flat));
  s.values = Matrix(s.m(), width);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (auto& v : s.values.v) v = nd(rng);
  return s;
}

}  // namespace

static void BM_EnumerateClasses(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(enumerate_classes(static_cast<int>(st.range(0))));
}
BENCHMARK(BM_EnumerateClasses)->DenseRange(2, 7);

static void BM_DenseLinear22(benchmark::State& st) {
  int n = static_cast<int>(st.range(0));
  auto L = LinearEquivariant::make(2, 2, 16, 16, ClassSetMode::Full);
  init_params(L, 1);
  std::mt19937_64 rng(2);
  auto A = DenseTensor::random(n, 2, 16, rng);
  for (auto _ : st) benchmark::DoNotOptimize(forward_dense(L, A));
}
BENCHMARK(BM_DenseLinear22)->RangeMultiplier(2)->Range(4, 32)->Unit(benchmark::kMicrosecond);

static void BM_SparseLinear22(benchmark::State& st) {
  auto s = graph_input(static_cast<int>(st.range(0)), 16, 3);
  auto L = LinearEquivariant::make(2, 2, 16, 16, ClassSetMode::Full);
  init_params(L, 4);
  for (auto _ : st) benchmark::DoNotOptimize(forward_sparse(L, s, s.edges));
  st.counters["m"] = s.m();
}
BENCHMARK(BM_SparseLinear22)->RangeMultiplier(4)->Range(64, 4096)->Unit(benchmark::kMillisecond);

static void BM_SparseAttention(benchmark::State& st, KernelKind kind) {
  auto s = graph_input(static_cast<int>(st.range(0)), 16, 5);
  auto P = AttentionParams::make(2, 2, 16, 16, 2, 8, KernelMap::make(kind, 32, 8, 6), {}, 7);
  for (auto _ : st) {
    if (kind == KernelKind::Softmax) benchmark::DoNotOptimize(attn_sparse(s, s.edges, P));
    else benchmark::DoNotOptimize(attn_kernel(s, s.edges, P));
  }
  st.counters["m"] = s.m();
}
BENCHMARK_CAPTURE(BM_SparseAttention, softmax, KernelKind::Softmax)
    ->RangeMultiplier(2)->Range(64, 256)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SparseAttention, performer, KernelKind::Performer)
    ->RangeMultiplier(4)->Range(64, 1024)->Unit(benchmark::kMillisecond);

static void BM_EncoderForwardBackward(benchmark::State& st) {
  Model m = build_model(chain_model_spec(KernelKind::Softmax), 8);
  Chain c = make_chain(static_cast<int>(st.range(0)), 1, 0);
  ModelPlan plan = plan_model(m, c.tensor.edges);
  std::vector<int> labels(c.n, 1);
  for (auto _ : st) {
    Tape t;
    Var y = model_forward(t, m, t.constant(c.tensor.values), plan, true);
    t.backward(chain_loss(t, y, &labels, LossKind::Bce));
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(20)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_Matmul(benchmark::State& st) {
  int r = static_cast<int>(st.range(0));
  Matrix a(r, 32, 0.5), b(32, 8, 0.25);
  for (auto _ : st) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK_MAIN();
