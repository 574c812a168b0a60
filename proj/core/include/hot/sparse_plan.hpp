#pragma once

#include <cstdint>
#include <vector>

#include "hot/autodiff.hpp"
#include "hot/partitions.hpp"
#include "hot/tensor.hpp"

namespace hot {

// Index structure for a sparse L_{k->l} from an input edge set to output tuples.
struct LinearPlan {
  struct Entry {
    bool gather = true;    // lightweight class: one input row per output row
    std::vector<int> idx;  // gather: input row per output row or -1
    PairList pairs;        // otherwise: (input row, output row) members
  };
  int out_rows = 0;
  std::vector<Entry> entries;  // aligned with the class list
  std::vector<int> bias_idx;   // bias row per output row

  // Number of row reads performed by a forward pass.
  std::uint64_t work() const;
};

LinearPlan build_linear_plan(const EdgeSet& in, const EdgeIndex& in_ix, const std::vector<int>& out_tuples, int l,
                             int out_rows, const std::vector<EquivalenceClass>& classes);
LinearPlan build_linear_plan(const EdgeSet& in, const EdgeSet& out, const std::vector<EquivalenceClass>& classes);

struct PatternGroup {
  Partition pattern;
  std::vector<int> rows;     // ascending rows with this pattern
  std::vector<int> local;    // row -> position in `rows`, -1 otherwise
  std::vector<int> compact;  // rows.size() * u compact tuples
};

// One group per partition of [k] in canonical order (possibly empty).
std::vector<PatternGroup> group_by_pattern(const EdgeSet& e);

struct AttentionClassPlan {
  int key_pattern = 0;    // index into in_groups
  int query_pattern = 0;  // index into out_groups
  PairList pairs;         // key-local src, query-local dst, sorted by dst
  std::vector<int> offsets;
  std::vector<int> key_group;    // per key-local row
  std::vector<int> query_group;  // per query-local row
  int groups = 0;
};

struct AttentionPlanOptions {
  bool pairs = true;   // softmax or unit coefficients
  bool groups = true;  // kernel decoupling
};

struct AttentionPlan {
  int k = 0;
  int l = 0;
  int out_rows = 0;
  std::vector<PatternGroup> in_groups;
  std::vector<PatternGroup> out_groups;
  std::vector<LinearPlan> key_plans;    // per input pattern
  std::vector<LinearPlan> query_plans;  // per output pattern
  std::vector<AttentionClassPlan> classes;

  std::uint64_t pair_count() const;
  // Rows touched by key/query pooling in kernel mode.
  std::uint64_t kernel_work() const;
};

// Classes of compact key/query layers.
std::vector<EquivalenceClass> compact_classes(int k, int u);

AttentionPlan build_attention_plan(const EdgeSet& in, const EdgeSet& out, const std::vector<EquivalenceClass>& classes,
                                   AttentionPlanOptions opt);

}  // namespace hot
