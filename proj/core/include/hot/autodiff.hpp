#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "hot/matrix.hpp"

namespace hot {

struct Node {
  Matrix value;
  Matrix grad;  // empty until reached by backward
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& grad_buffer() {
    if (grad.size() != value.size() || !grad.same_shape(value)) grad = Matrix(value.rows, value.cols);
    return grad;
  }
};
using Var = std::shared_ptr<Node>;

// Records primitives for reverse-mode differentiation. With record = false
// nothing is kept and intermediate nodes die with their last reference.
class Tape {
 public:
  explicit Tape(bool record = true, std::uint64_t seed = 0) : record_(record), rng_(seed) {}

  bool recording() const { return record_; }
  Var constant(Matrix m);
  Var input(Matrix m);
  // Leaf bound to a parameter matrix; reused on repeated calls.
  Var param(const Matrix& p);
  Var make(Matrix value, const char* op, std::vector<Var> parents, std::function<void(Node&)> bw);

  // Seed defaults to ones; shape must match out.
  void backward(const Var& out, const Matrix* seed = nullptr);
  Matrix grad_of(const Matrix* p) const;
  std::size_t size() const { return ops_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  bool record_;
  std::mt19937_64 rng_;
  std::vector<Var> nodes_;
  std::unordered_map<const Matrix*, Var> params_;
  std::size_t ops_ = 0;
};

struct PairList {
  std::vector<int> src;  // key / input rows
  std::vector<int> dst;  // query / output rows
  std::size_t size() const { return src.size(); }
};

// Index arrays passed by pointer must outlive the tape's backward pass.
namespace ad {

Var matmul(Tape& t, const Var& a, const Var& b);
Var add(Tape& t, const Var& a, const Var& b);
Var sub(Tape& t, const Var& a, const Var& b);
Var add_row(Tape& t, const Var& a, const Var& row);
Var scale(Tape& t, const Var& a, double s);
Var mul(Tape& t, const Var& a, const Var& b);
Var sum(Tape& t, const Var& a);
// idx[r] = -1 yields a zero row.
Var gather_rows(Tape& t, const Var& a, const std::vector<int>* idx);
// out[r] = sum_c x[idx_c[r]] w_c + bias[bias_idx[r]]; -1 entries are skipped.
Var gather_linear(Tape& t, const Var& x, const std::vector<const std::vector<int>*>& idx, const std::vector<Var>& w,
                  const Var& bias, const std::vector<int>* bias_idx, int rows);
// out[idx[r]] += a[r]; idx[r] = -1 is dropped.
Var scatter_add_rows(Tape& t, const Var& a, const std::vector<int>* idx, int rows);
// out[dst[p]] += w[p] * src[src_idx[p]]; w may be null (weight 1).
Var gather_scatter(Tape& t, const Var& src, const Var& w, const PairList* pairs, int rows);
// s[p] = scale * <q[qmap[dst[p]]], k[kmap[src[p]]]>; null map = identity.
Var pair_dot(Tape& t, const Var& q, const Var& k, const PairList* pairs, const std::vector<int>* qmap,
             const std::vector<int>* kmap, double scale);
// Softmax within contiguous segments [off[s], off[s+1]).
Var segment_softmax(Tape& t, const Var& s, const std::vector<int>* offsets);
// exp(x' W^T - |x'|^2/2 - shift)/sqrt(dK), x' = prescale * x; shift = max of x'W^T (held constant).
Var performer_features(Tape& t, const Var& x, const Matrix* w, double prescale, bool shift);
Var elu1(Tape& t, const Var& x);
// Grouped linear attention: out_q = phiQ_q^T S_g (/ phiQ_q^T z_g) with S_g, z_g pooled over keys of group g.
Var kernel_aggregate(Tape& t, const Var& phi_q, const Var& phi_k, const Var& v, const std::vector<int>* key_group,
                     const std::vector<int>* query_group, int groups, bool normalize);
Var layer_norm(Tape& t, const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var batch_norm(Tape& t, const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var gelu(Tape& t, const Var& x);
Var relu(Tape& t, const Var& x);
Var dropout(Tape& t, const Var& x, double rate);
Var concat_cols(Tape& t, const std::vector<Var>& xs);
Var slice_cols(Tape& t, const Var& x, int c0, int c1);
// Mean over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Tape& t, const Var& logits, const std::vector<int>* labels);
// Mean binary cross-entropy of sigmoid(z) for an N x 1 logit column.
Var bce_with_logits(Tape& t, const Var& z, const std::vector<int>* labels);

double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace ad

struct FdResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t checked = 0;
  std::string worst;
  // Split at |gradient| >= resolved_floor: relative error above, absolute error below.
  double max_rel_err_resolved = 0.0;
  double max_abs_err_unresolved = 0.0;
  std::size_t unresolved = 0;
  std::string worst_resolved;
};

// Compares tape gradients of a scalar fn against central differences with
// h = 1e-5 * max(1, |x|). fn must read the points through Tape::param.
FdResult fd_check(const std::function<Var(Tape&)>& fn, const std::vector<Matrix*>& points,
                  std::size_t max_entries_per_point = 0, std::uint64_t seed = 0, double resolved_floor = 1e-6);

struct ParamStore {
  std::vector<std::string> names;
  std::vector<Matrix*> params;
  std::vector<Matrix> grads;
  std::vector<Matrix> m1, m2;
  long step = 0;

  void bind(std::vector<Matrix*> ps, std::vector<std::string> ns = {});
  void zero_grad();
  void accumulate(const Tape& tape, double scale = 1.0);
  void accumulate(const std::vector<Matrix>& g, double scale = 1.0);
  std::vector<Matrix> collect(const Tape& tape) const;
};

void adam_step(ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

}  // namespace hot
