#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hot/matrix.hpp"
#include "hot/partitions.hpp"
#include "hot/tensor.hpp"

namespace hot {

enum class ClassSetMode { Full, Lightweight, Explicit };

std::string to_string(ClassSetMode m);
ClassSetMode class_set_mode_from_string(const std::string& s);

// L_{k->l}: one d_in x d_out weight per class, one bias row per output pattern.
struct LinearEquivariant {
  int k = 0;
  int l = 0;
  int d_in = 0;
  int d_out = 0;
  ClassSetMode mode = ClassSetMode::Full;
  std::vector<EquivalenceClass> classes;
  std::vector<Matrix> weights;
  Matrix bias;  // bell(l) x d_out, rows follow enumerate_classes(l)
  std::uint64_t seed = 0;

  static LinearEquivariant make(int k, int l, int d_in, int d_out, ClassSetMode mode,
                                std::vector<EquivalenceClass> explicit_classes = {});

  int class_index(const Partition& part) const;  // -1 when absent
  std::vector<Matrix*> parameters();
  std::size_t parameter_count() const;
};

// Row of `bias` used by an output multi-index.
int bias_row(const int* j, int l);

enum class InitScheme { GlorotUniform, Zero };
void init_params(LinearEquivariant& layer, std::uint64_t seed, InitScheme scheme = InitScheme::GlorotUniform);

DenseTensor forward_dense(const LinearEquivariant& layer, const DenseTensor& a);
DenseTensor forward_lightweight(const LinearEquivariant& layer, const DenseTensor& a);
// 1 -> k layer over uniform_1_to_k_subset(k); only outputs with distinct entries are filled.
DenseTensor forward_uniform_1_to_k(const LinearEquivariant& layer, const DenseTensor& a);

enum class CompactRole { Query, Key };

struct CompactLayer {
  LinearEquivariant layer;  // k -> u
  Restriction map;          // f: j -> compact index
};

// Merges output positions of `full` according to the role's restriction of mu.
CompactLayer construct_compact(const LinearEquivariant& full, const EquivalenceClass& mu, CompactRole role);
// Classes of a k -> l layer that can reach outputs with the given pattern.
std::vector<EquivalenceClass> effective_classes(int k, const Partition& output_pattern);

void save_params(std::ostream& os, const LinearEquivariant& layer);
LinearEquivariant load_params(std::istream& is);

}  // namespace hot

#include "hot/autodiff.hpp"
#include "hot/sparse_plan.hpp"

namespace hot {

// Tape forward of a sparse layer; rows follow the plan's output tuples.
Var linear_forward(Tape& t, const LinearEquivariant& layer, const Var& x, const LinearPlan& plan);
SparseTensor forward_sparse(const LinearEquivariant& layer, const SparseTensor& s, const EdgeSet& eout);

}  // namespace hot
