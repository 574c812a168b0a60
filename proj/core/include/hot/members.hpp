#pragma once

#include <cstdint>
#include <vector>

#include "hot/partitions.hpp"

namespace hot {

// Enumerates the input multi-indices i with (i, j) in a class for a fixed j.
struct ClassShape {
  int k = 0;
  int l = 0;
  std::vector<int> in_block;       // input position -> block
  std::vector<int> block_out_pos;  // block -> first output position or -1
  std::vector<int> free_blocks;    // blocks without output positions
  std::uint32_t q_code = 0;

  explicit ClassShape(const EquivalenceClass& c);

  // Members per compatible j: falling factorial (n - u_q)_{free}.
  std::uint64_t members_per_output(int n) const;

  template <class F>
  void for_each_member(const int* j, int n, F&& fn) const {
    std::vector<int> vals(block_out_pos.size(), -1), i(k), cur(free_blocks.size(), -1);
    for (std::size_t b = 0; b < vals.size(); ++b)
      if (block_out_pos[b] >= 0) vals[b] = j[block_out_pos[b]];
    std::size_t nf = free_blocks.size(), depth = 0;
    auto used = [&](int v, std::size_t upto) {
      for (int s = 0; s < l; ++s)
        if (j[s] == v) return true;
      for (std::size_t t = 0; t < upto; ++t)
        if (cur[t] == v) return true;
      return false;
    };
    for (;;) {
      if (depth == nf) {
        for (std::size_t t = 0; t < nf; ++t) vals[free_blocks[t]] = cur[t];
        for (int t = 0; t < k; ++t) i[t] = vals[in_block[t]];
        fn(static_cast<const int*>(i.data()));
        if (nf == 0) return;
        --depth;
      }
      int v = cur[depth] + 1;
      while (v < n && used(v, depth)) ++v;
      if (v >= n) {
        cur[depth] = -1;
        if (depth == 0) return;
        --depth;
        continue;
      }
      cur[depth] = v;
      ++depth;
    }
  }
};

}  // namespace hot
