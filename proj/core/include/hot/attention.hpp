#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hot/autodiff.hpp"
#include "hot/equivariant_linear.hpp"
#include "hot/members.hpp"
#include "hot/sparse_plan.hpp"
#include "hot/tensor.hpp"

namespace hot {

enum class KernelKind { Softmax, Performer, Elu1, Constant };

std::string to_string(KernelKind k);
KernelKind kernel_kind_from_string(const std::string& s);

struct KernelMap {
  KernelKind kind = KernelKind::Softmax;
  int d_K = 32;
  Matrix projection;  // d_K x d_H, performer only
  std::uint64_t seed = 0;

  static KernelMap make(KernelKind kind, int d_K, int d_H, std::uint64_t seed);
};

// Row-wise feature map. Performer: exp(W x' - |x'|^2/2 - shift)/sqrt(d_K) with x' = prescale * x.
Matrix kernel_features(const Matrix& x, const KernelMap& km, double prescale = 1.0, bool shift = false);

struct HeadClassParams {
  LinearEquivariant query;  // k -> u_q (full k -> 0 when u_q = 0)
  LinearEquivariant key;    // k -> u_k
  Matrix w_v;               // d_in x d_H
  Matrix w_o;               // d_H x d_out
};

struct AttentionParams {
  int k = 0;
  int l = 0;
  int d_in = 0;
  int d_out = 0;
  int H = 1;
  int d_H = 1;
  std::vector<EquivalenceClass> classes;
  std::vector<HeadClassParams> bundles;  // index h * classes.size() + c
  KernelMap kernel;
  bool force_unit_alpha = false;
  bool normalize = true;
  double dropout = 0.0;

  static AttentionParams make(int k, int l, int d_in, int d_out, int H, int d_H, KernelMap kernel,
                              std::vector<EquivalenceClass> classes, std::uint64_t seed);

  HeadClassParams& at(int h, int c) { return bundles[static_cast<std::size_t>(h) * classes.size() + c]; }
  const HeadClassParams& at(int h, int c) const { return bundles[static_cast<std::size_t>(h) * classes.size() + c]; }
  void filter_classes(const std::function<bool(const EquivalenceClass&)>& keep);
  std::vector<Matrix*> parameters();
  std::size_t parameter_count() const;
};

// Dense per-class coefficients: for every j with pattern mu_q, one block of
// coefficients over its members in enumeration order.
struct ClassCoefficients {
  EquivalenceClass mu;
  int n = 0;
  std::uint64_t per_j = 0;
  std::vector<std::uint64_t> j_flat;
  std::vector<std::uint32_t> src;  // flat input index per coefficient
  std::vector<double> alpha;

  // 0 when (i, j) is not in the class.
  double at(std::uint64_t i_flat, std::uint64_t j_flat) const;
};

// Scores scale * <Q~_{f(j)}, K~_{f(i)}> followed by a per-j softmax.
ClassCoefficients coeffs_softmax(const DenseTensor& q_compact, const DenseTensor& k_compact, const EquivalenceClass& mu,
                                 double scale);
// Coupled kernel weights phi(Q~)^T phi(K~), optionally row-normalized.
ClassCoefficients coeffs_kernel(const DenseTensor& q_compact, const DenseTensor& k_compact, const EquivalenceClass& mu,
                                const KernelMap& km, double prescale, bool normalize);

// Compact query/key tensors for one (head, class).
DenseTensor compact_query_dense(const HeadClassParams& b, const DenseTensor& a);
DenseTensor compact_key_dense(const HeadClassParams& b, const DenseTensor& a);

// Reference attention over the full grid with per-pair coefficients.
// Non-softmax kernels use coupled (per-query) key sets here.
DenseTensor attn_dense(const DenseTensor& a, const AttentionParams& p);

AttentionPlanOptions plan_options(const AttentionParams& p);
Var attention_forward(Tape& t, const AttentionParams& p, const Var& x, const AttentionPlan& plan, bool train);

SparseTensor attn_sparse(const SparseTensor& s, const EdgeSet& eout, const AttentionParams& p);
// Decoupled kernel attention; sparse input or the full grid of a dense input.
SparseTensor attn_kernel(const SparseTensor& s, const EdgeSet& eout, const AttentionParams& p);
DenseTensor attn_kernel(const DenseTensor& a, const AttentionParams& p);

// Linear weights w_mu = sum_h W^V_{h,mu} W^O_{h,mu} in the class order of p.
std::vector<Matrix> merged_value_output(const AttentionParams& p);

}  // namespace hot
