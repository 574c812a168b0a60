#include <gtest/gtest.h>

#include <sstream>

#include "hot/equivariant_linear.hpp"
#include "oracles.hpp"

using namespace hot;

namespace {

LinearEquivariant random_layer(int k, int l, int din, int dout, std::uint64_t seed,
                               ClassSetMode mode = ClassSetMode::Full) {
  auto L = LinearEquivariant::make(k, l, din, dout, mode);
  init_params(L, seed);
  std::mt19937_64 rng(seed);
  for (auto& b : L.bias.v) b = std::normal_distribution<double>()(rng);
  return L;
}

}  // namespace

TEST(Linear, CountsFollowBell) {
  auto L = LinearEquivariant::make(2, 2, 3, 4, ClassSetMode::Full);
  EXPECT_EQ(L.weights.size(), 15u);
  EXPECT_EQ(L.bias.rows, 2);
  EXPECT_EQ(LinearEquivariant::make(2, 0, 3, 4, ClassSetMode::Full).bias.rows, 1);
  EXPECT_EQ(L.parameter_count(), 15u * 12 + 2 * 4);
}

TEST(Linear, DenseMatchesExhaustiveOracle) {
  std::mt19937_64 rng(1);
  for (int k = 1; k <= 3; ++k)
    for (int l = 0; l <= 3; ++l) {
      if (k + l > 5) continue;
      auto L = random_layer(k, l, 2, 3, rng());
      auto A = oracle::random_dense(3, k, 2, rng);
      EXPECT_LE(oracle::max_diff(forward_dense(L, A), oracle::linear(L, A)), 1e-12) << k << "->" << l;
    }
}

TEST(Linear, IdentityClass) {
  auto L = LinearEquivariant::make(1, 1, 2, 2, ClassSetMode::Full);
  L.weights[L.class_index(Partition({0, 0}))] = Matrix::identity(2);
  std::mt19937_64 rng(2);
  auto A = oracle::random_dense(4, 1, 2, rng);
  EXPECT_EQ(oracle::max_diff(forward_dense(L, A), A), 0.0);
}

TEST(Linear, RejectsMismatch) {
  auto L = LinearEquivariant::make(2, 1, 2, 2, ClassSetMode::Full);
  std::mt19937_64 rng(3);
  EXPECT_THROW(forward_dense(L, oracle::random_dense(3, 1, 2, rng)), std::invalid_argument);
  EXPECT_THROW(forward_dense(L, oracle::random_dense(3, 2, 3, rng)), std::invalid_argument);
}

TEST(Linear, LightweightEqualsZeroPadded) {
  std::mt19937_64 rng(4);
  auto light = random_layer(1, 2, 2, 3, rng(), ClassSetMode::Lightweight);
  auto full = LinearEquivariant::make(1, 2, 2, 3, ClassSetMode::Full);
  for (std::size_t c = 0; c < light.classes.size(); ++c)
    full.weights[full.class_index(light.classes[c].part)] = light.weights[c];
  full.bias = light.bias;
  auto A = oracle::random_dense(4, 1, 2, rng);
  EXPECT_LE(oracle::max_diff(forward_lightweight(light, A), oracle::linear(full, A)), 1e-12);
  EXPECT_THROW(LinearEquivariant::make(1, 0, 2, 2, ClassSetMode::Lightweight), std::invalid_argument);
}

TEST(Linear, LightweightZeroWeightsGiveBiasField) {
  auto L = LinearEquivariant::make(1, 2, 2, 1, ClassSetMode::Lightweight);
  L.bias(0, 0) = 3.0;
  L.bias(1, 0) = -1.0;
  std::mt19937_64 rng(5);
  auto out = forward_lightweight(L, oracle::random_dense(3, 1, 2, rng));
  for (auto& j : oracle::grid(3, 2)) EXPECT_EQ(out.values[oracle::flat(j, 3)], j[0] == j[1] ? 3.0 : -1.0);
}

TEST(Linear, SparseFullGridEqualsDense) {
  std::mt19937_64 rng(6);
  auto A = oracle::random_dense(4, 2, 3, rng);
  auto grid = EdgeSet::full_grid(4, 2);
  auto L = random_layer(2, 2, 3, 2, rng());
  EXPECT_LE(oracle::max_diff(densify(forward_sparse(L, sparsify(A, grid), grid)), forward_dense(L, A)), 1e-10);
}

TEST(Linear, SparseEmptyInputIsBias) {
  auto L = random_layer(2, 2, 3, 2, 7);
  auto out_edges = EdgeSet::full_grid(3, 2);
  auto out = forward_sparse(L, SparseTensor{EdgeSet(3, 2), Matrix(0, 3)}, out_edges);
  for (int r = 0; r < out.m(); ++r) {
    std::vector<int> j(out.edges.tuple(r), out.edges.tuple(r) + 2);
    for (int c = 0; c < 2; ++c) EXPECT_EQ(out.values(r, c), L.bias(oracle::bias_row_of(j), c));
  }
}

TEST(Linear, SparseMatchesOracleOnSubset) {
  // dense oracle over the densified input, read at the output edges
  std::mt19937_64 rng(8);
  auto in = EdgeSet::from_tuples(5, 2, {0, 1, 1, 0, 1, 2, 2, 1, 3, 3, 4, 0});
  auto S = sparsify(oracle::random_dense(5, 2, 2, rng), in);
  auto out_edges = add_self_loops(in);
  auto L = random_layer(2, 2, 2, 2, rng());
  auto got = forward_sparse(L, S, out_edges);
  auto ref = oracle::linear(L, densify(S));
  for (int r = 0; r < got.m(); ++r) {
    std::vector<int> j(got.edges.tuple(r), got.edges.tuple(r) + 2);
    for (int c = 0; c < 2; ++c) EXPECT_NEAR(got.values(r, c), ref.values[oracle::flat(j, 5) * 2 + c], 1e-12);
  }
}

TEST(Linear, InitDeterministicAndScaled) {
  auto a = LinearEquivariant::make(2, 2, 4, 6, ClassSetMode::Full);
  auto b = a;
  init_params(a, 9);
  init_params(b, 9);
  EXPECT_EQ(a.weights[3].v, b.weights[3].v);
  for (double v : a.bias.v) EXPECT_EQ(v, 0.0);
  auto big = LinearEquivariant::make(1, 1, 100, 100, ClassSetMode::Full);
  init_params(big, 10);
  double sum = 0, sq = 0;
  std::size_t cnt = 0;
  for (auto& w : big.weights)
    for (double v : w.v) {
      sum += v;
      sq += v * v;
      ++cnt;
    }
  double var = sq / cnt - (sum / cnt) * (sum / cnt);
  EXPECT_NEAR(var, 2.0 / 200.0, 0.2 * 2.0 / 200.0);
}

TEST(Linear, CompactIdentityForFirstOrder) {
  auto L = random_layer(1, 1, 2, 2, 11);
  EquivalenceClass mu(Partition({0, 0}), 1, 1);
  auto cl = construct_compact(L, mu, CompactRole::Query);
  EXPECT_EQ(cl.layer.l, 1);
  std::mt19937_64 rng(12);
  auto A = oracle::random_dense(4, 1, 2, rng);
  EXPECT_LE(oracle::max_diff(forward_dense(cl.layer, A), forward_dense(L, A)), 1e-12);
}

TEST(Linear, CompactOrdersForFig6Class) {
  EquivalenceClass mu(Partition({0, 0, 1}), 2, 1);
  EXPECT_EQ(mu.u_k, 1);
  EXPECT_EQ(mu.u_q, 1);
}

TEST(Linear, UniformSubsetMatchesFull) {
  std::mt19937_64 rng(13);
  auto sub = LinearEquivariant::make(1, 2, 2, 2, ClassSetMode::Explicit, uniform_1_to_k_subset(2));
  init_params(sub, 14);
  auto full = LinearEquivariant::make(1, 2, 2, 2, ClassSetMode::Full);
  for (std::size_t c = 0; c < sub.classes.size(); ++c) full.weights[full.class_index(sub.classes[c].part)] = sub.weights[c];
  auto A = oracle::random_dense(4, 1, 2, rng);
  auto ref = oracle::linear(full, A);
  auto got = forward_uniform_1_to_k(sub, A);
  for (auto& j : oracle::grid(4, 2))
    if (j[0] != j[1])
      for (int c = 0; c < 2; ++c) EXPECT_NEAR(got.values[oracle::flat(j, 4) * 2 + c], ref.values[oracle::flat(j, 4) * 2 + c], 1e-12);
}

TEST(Linear, SaveLoad) {
  auto L = random_layer(2, 1, 3, 2, 15);
  std::stringstream ss;
  save_params(ss, L);
  auto R = load_params(ss);
  ASSERT_EQ(R.weights.size(), L.weights.size());
  for (std::size_t c = 0; c < L.weights.size(); ++c) EXPECT_EQ(R.weights[c].v, L.weights[c].v);
  EXPECT_EQ(R.bias.v, L.bias.v);
}
