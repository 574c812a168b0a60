#include <gtest/gtest.h>

#include <set>

#include "hot/partitions.hpp"
#include "oracles.hpp"

using namespace hot;

TEST(Partitions, BellNumbers) {
  const std::uint64_t expect[] = {1, 1, 2, 5, 15, 52, 203, 877};
  for (int r = 0; r < 8; ++r) EXPECT_EQ(bell(r), expect[r]) << r;
  EXPECT_THROW(bell(-1), std::invalid_argument);
}

TEST(Partitions, EnumerationIsCompleteAndUnique) {
  for (int r = 1; r <= 6; ++r) {
    auto ps = enumerate_classes(r);
    ASSERT_EQ(ps.size(), bell(r));
    std::set<std::vector<int>> seen;
    for (auto& p : ps) {
      EXPECT_TRUE(Partition::valid_rgs(p.rgs));
      EXPECT_TRUE(seen.insert(p.rgs).second);
    }
    // every pattern of a brute-force index grid shows up
    std::set<std::vector<int>> grid;
    for (auto& idx : oracle::grid(r, r)) grid.insert(oracle::rgs(idx));
    EXPECT_EQ(grid, seen);
  }
  EXPECT_EQ(enumerate_classes(0).size(), 1u);
}

TEST(Partitions, SingleBlockFirst) {
  auto ps = enumerate_classes(4);
  EXPECT_EQ(ps.front().blocks(), 1);
  EXPECT_EQ(ps.back().blocks(), 4);
}

TEST(Partitions, RejectsBadRgs) {
  EXPECT_THROW(Partition({1, 0}), std::invalid_argument);
  EXPECT_THROW(Partition({0, 2}), std::invalid_argument);
  EXPECT_NO_THROW(Partition({0, 1, 0, 2}));
}

TEST(Partitions, ToString) {
  EXPECT_EQ(Partition({0, 0, 1}).to_string(), "{{1,2},{3}}");
  EXPECT_EQ(Partition({0, 1, 0}).to_string(), "{{1,3},{2}}");
}

TEST(Partitions, PatternOf) {
  std::vector<int> idx{7, 3, 7, 1};
  EXPECT_EQ(pattern_of(idx).rgs, (std::vector<int>{0, 1, 0, 2}));
  EXPECT_THROW(pattern_of(std::vector<int>{}), std::invalid_argument);
  EXPECT_EQ(pattern_code(idx.data(), 4), pattern_code(pattern_of(idx)));
}

TEST(Partitions, InClassMatchesBruteForce) {
  auto cls = all_classes(2, 1);
  ASSERT_EQ(cls.size(), 5u);
  for (auto& ij : oracle::grid(3, 3)) {
    int hits = 0;
    for (auto& mu : cls) {
      bool in = in_class(std::span<const int>(ij.data(), 2), std::span<const int>(ij.data() + 2, 1), mu);
      EXPECT_EQ(in, oracle::rgs(ij) == mu.part.rgs);
      hits += in;
    }
    EXPECT_EQ(hits, 1);
  }
}

TEST(Partitions, Restrictions) {
  EquivalenceClass mu(Partition({0, 1, 1, 2}), 2, 2);
  EXPECT_EQ(mu.mu_k.rgs, (std::vector<int>{0, 1}));
  EXPECT_EQ(mu.mu_q.rgs, (std::vector<int>{0, 1}));
  EXPECT_EQ(mu.u_k, 2);
  EXPECT_EQ(mu.u_q, 2);
  EquivalenceClass nu(Partition({0, 0, 1}), 2, 1);
  EXPECT_EQ(nu.u_k, 1);
  EXPECT_EQ(nu.u_q, 1);
  auto r = restrict(nu, Side::Input);
  EXPECT_EQ(r.u, 1);
  EXPECT_EQ(compact_index(r, std::vector<int>{4, 4}), (std::vector<int>{4}));
  EXPECT_THROW(EquivalenceClass(Partition({0, 1}), 2, 1), std::invalid_argument);
}

TEST(Partitions, LightweightSubset) {
  for (int k = 1; k <= 3; ++k)
    for (int l = 1; l <= 3; ++l) {
      auto lw = lightweight_subset(k, l);
      int brute = 0;
      for (auto& mu : all_classes(k, l)) {
        bool every = true;
        for (int t = 0; t < k; ++t) {
          bool hit = false;
          for (int s = k; s < k + l; ++s) hit = hit || mu.part.rgs[s] == mu.part.rgs[t];
          every = every && hit;
        }
        brute += every;
      }
      EXPECT_EQ(static_cast<int>(lw.size()), brute) << k << "," << l;
    }
  EXPECT_EQ(lightweight_subset(1, 1).size(), 1u);
  EXPECT_THROW(lightweight_subset(1, 0), std::invalid_argument);
}

TEST(Partitions, FixIndex) {
  for (auto& mu : lightweight_subset(2, 2))
    for (auto& j : oracle::grid(4, 2)) {
      if (oracle::rgs(j) != mu.mu_q.rgs) continue;
      auto i = fix_index(mu, j);
      EXPECT_EQ(oracle::rgs(oracle::cat(i, j)), mu.part.rgs);
    }
  EquivalenceClass heavy(Partition({0, 1, 2}), 2, 1);
  EXPECT_THROW(fix_index(heavy, std::vector<int>{0}), std::invalid_argument);
}

TEST(Partitions, UniformSubsetSize) {
  // 1 + k classes: input joins one of k output blocks or stays apart
  for (int k = 1; k <= 4; ++k) EXPECT_EQ(uniform_1_to_k_subset(k).size(), static_cast<std::size_t>(k + 1));
}
