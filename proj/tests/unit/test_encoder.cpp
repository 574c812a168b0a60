#include <gtest/gtest.h>

#include <sstream>

#include "hot/encoder.hpp"
#include "hot/experiments.hpp"
#include "oracles.hpp"

using namespace hot;

namespace {

LayerSpec spec(int k, int l, KernelKind kind = KernelKind::Softmax) {
  LayerSpec s;
  s.k = k;
  s.l = l;
  s.d_in = 3;
  s.d_out = 3;
  s.d_H = 2;
  s.H = 2;
  s.kernel = kind;
  s.d_K = 16;
  return s;
}

Graph random_graph(int n, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.4);
  std::vector<std::array<int, 2>> und;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (coin(rng)) und.push_back({a, b});
  return make_undirected(n, und);
}

}  // namespace

TEST(Encoder, DenseLayerEquivariant) {
  std::mt19937_64 rng(1);
  for (int k = 1; k <= 2; ++k)
    for (int l = 0; l <= 2; ++l) {
      auto e = EncoderLayer::make(spec(k, l), rng());
      auto A = oracle::random_dense(4, k, 3, rng);
      auto p = oracle::random_perm(4, rng);
      EXPECT_LE(oracle::max_diff(enc_forward(e, oracle::permute(A, p)), oracle::permute(enc_forward(e, A), p)), 1e-9);
    }
}

TEST(Encoder, SparseModelEquivariant) {
  std::mt19937_64 rng(2);
  for (auto kind : {KernelKind::Softmax, KernelKind::Performer, KernelKind::Elu1}) {
    Model m = build_model(chain_model_spec(kind, 6), rng());
    Matrix x = oracle::random_matrix(6, 2, rng);
    auto S = encode_graph(x, random_graph(6, rng));
    auto p = NodePermutation::random(6, rng);
    auto lhs = model_forward(m, apply_permutation(S, p));
    auto rhs = apply_permutation(model_forward(m, S), p);
    ASSERT_EQ(lhs.edges, rhs.edges);
    EXPECT_LE(max_abs_diff(lhs.values, rhs.values), 1e-9);
  }
}

TEST(Encoder, SparseFullGridEqualsDense) {
  std::mt19937_64 rng(3);
  auto e = EncoderLayer::make(spec(2, 2), 4);
  auto A = oracle::random_dense(4, 2, 3, rng);
  auto grid = EdgeSet::full_grid(4, 2);
  EXPECT_LE(max_abs_diff(densify(enc_forward(e, sparsify(A, grid))), enc_forward(e, A)), 1e-10);
}

TEST(Encoder, ReductionIsLinear) {
  std::mt19937_64 rng(5);
  auto e = EncoderLayer::make(spec(2, 1), 6);
  reduce_to_linear(e);
  auto A = oracle::random_dense(4, 2, 3, rng);
  EXPECT_LE(oracle::max_diff(enc_forward(e, A), oracle::linear(equivalent_linear(e), A)), 1e-12);
}

TEST(Encoder, BuildModelChainsOrders) {
  ModelSpec s;
  s.layers = {spec(2, 2), spec(2, 1)};
  s.layers[1].d_in = 0;
  s.out_dim = 2;
  Model m = build_model(s, 7);
  EXPECT_EQ(m.layers[1].d_in, 3);
  EXPECT_EQ(m.output_order(), 1);
  EXPECT_EQ(m.parameters().size(), m.parameter_names().size());
  s.layers[1].k = 1;
  EXPECT_THROW(build_model(s, 7), std::invalid_argument);
}

TEST(Encoder, SpecJsonRoundTrip) {
  ModelSpec s = chain_model_spec(KernelKind::Performer);
  nlohmann::json j = s;
  ModelSpec r = j.get<ModelSpec>();
  EXPECT_EQ(nlohmann::json(r), j);
  EXPECT_EQ(r.layers[0].kernel, KernelKind::Performer);
}

TEST(Encoder, CheckpointRoundTrip) {
  Model m = build_model(chain_model_spec(KernelKind::Softmax, 8), 9);
  std::stringstream ss;
  save_checkpoint(ss, m);
  Model r = load_checkpoint(ss);
  auto a = m.parameters(), b = r.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_EQ(a[t]->v, b[t]->v);
  std::stringstream bad("HOTM garbage");
  EXPECT_THROW(load_checkpoint(bad), std::exception);
}

TEST(Encoder, MpnnEmulationMatchesOracle) {
  std::mt19937_64 rng(10);
  auto M = AffineMap::random(4, 8, rng), U = AffineMap::random(3, 7, rng);
  auto o = MPNNOracle::affine(3, 2, 4, 3, M, U);
  Graph g = make_undirected(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}, 2);
  for (auto& v : g.edge_features.v) v = std::normal_distribution<double>()(rng);
  Matrix x = oracle::random_matrix(6, 3, rng);
  auto out = model_forward(mpnn_emulation_weights(o), mpnn_pack(x, g));
  Matrix h = oracle::mpnn(x, g, M, U);
  EdgeIndex ix(out.edges);
  for (int j = 0; j < 6; ++j) {
    int t[2] = {j, j};
    int r = ix.find(t);
    ASSERT_GE(r, 0);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.values(r, c), h(j, c), 1e-6);
  }
}

TEST(Encoder, MpnnOracleMatchesReference) {
  std::mt19937_64 rng(11);
  auto M = AffineMap::random(2, 5, rng), U = AffineMap::random(2, 4, rng);
  auto o = MPNNOracle::affine(2, 1, 2, 2, M, U);
  Graph g = make_undirected(4, {{0, 1}, {0, 2}, {2, 3}});
  Matrix x = oracle::random_matrix(4, 2, rng);
  EXPECT_LE(max_abs_diff(mpnn_oracle_forward(o, x, g), oracle::mpnn(x, g, M, U)), 1e-14);
}
