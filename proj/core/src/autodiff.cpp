#include "hot/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hot {

Var Tape::constant(Matrix m) {
  auto n = std::make_shared<Node>();
  n->value = std::move(m);
  n->op = "constant";
  return n;
}

Var Tape::input(Matrix m) {
  auto n = std::make_shared<Node>();
  n->value = std::move(m);
  n->requires_grad = record_;
  n->op = "input";
  if (record_) nodes_.push_back(n);
  return n;
}

Var Tape::param(const Matrix& p) {
  if (record_) {
    auto it = params_.find(&p);
    if (it != params_.end()) return it->second;
  }
  auto n = std::make_shared<Node>();
  n->value = p;
  n->requires_grad = record_;
  n->op = "param";
  if (record_) {
    params_.emplace(&p, n);
    nodes_.push_back(n);
  }
  return n;
}

Var Tape::make(Matrix value, const char* op, std::vector<Var> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  ++ops_;
  if (!record_) return n;
  bool req = false;
  for (auto& p : parents) req = req || (p && p->requires_grad);
  n->requires_grad = req;
  if (req) {
    n->parents = std::move(parents);
    n->backward = std::move(bw);
  }
  nodes_.push_back(n);
  return n;
}

void Tape::backward(const Var& out, const Matrix* seed) {
  if (!record_) throw std::logic_error("Tape::backward: tape was not recording");
  Matrix& g = out->grad_buffer();
  if (seed) {
    if (!seed->same_shape(out->value)) throw std::invalid_argument("Tape::backward: seed shape mismatch");
    add_inplace(g, *seed);
  } else {
    for (auto& x : g.v) x += 1.0;
  }
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (!n.requires_grad || n.grad.size() == 0 || n.parents.empty()) continue;
    if (!n.backward) throw std::logic_error(std::string("Tape::backward: no gradient rule for op ") + n.op);
    n.backward(n);
  }
}

Matrix Tape::grad_of(const Matrix* p) const {
  auto it = params_.find(p);
  if (it == params_.end() || it->second->grad.size() == 0) return Matrix(p->rows, p->cols);
  return it->second->grad;
}

namespace ad {

namespace {

bool needs(const Var& v) { return v && v->requires_grad; }

}  // namespace

Var matmul(Tape& t, const Var& a, const Var& b) {
  return t.make(hot::matmul(a->value, b->value), "matmul", {a, b}, [](Node& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (needs(a)) add_inplace(a->grad_buffer(), matmul_nt(n.grad, b->value));
    if (needs(b)) add_inplace(b->grad_buffer(), matmul_tn(a->value, n.grad));
  });
}

Var add(Tape& t, const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("ad::add: shape mismatch");
  Matrix v = a->value;
  add_inplace(v, b->value);
  return t.make(std::move(v), "add", {a, b}, [](Node& n) {
    for (auto& p : n.parents)
      if (needs(p)) add_inplace(p->grad_buffer(), n.grad);
  });
}

Var sub(Tape& t, const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("ad::sub: shape mismatch");
  Matrix v = a->value;
  add_inplace(v, b->value, -1.0);
  return t.make(std::move(v), "sub", {a, b}, [](Node& n) {
    if (needs(n.parents[0])) add_inplace(n.parents[0]->grad_buffer(), n.grad);
    if (needs(n.parents[1])) add_inplace(n.parents[1]->grad_buffer(), n.grad, -1.0);
  });
}

Var add_row(Tape& t, const Var& a, const Var& row) {
  if (row->value.rows != 1 || row->value.cols != a->value.cols) throw std::invalid_argument("ad::add_row: shape mismatch");
  Matrix v = a->value;
  for (int r = 0; r < v.rows; ++r)
    for (int c = 0; c < v.cols; ++c) v(r, c) += row->value.v[c];
  return t.make(std::move(v), "add_row", {a, row}, [](Node& n) {
    if (needs(n.parents[0])) add_inplace(n.parents[0]->grad_buffer(), n.grad);
    if (needs(n.parents[1])) {
      Matrix& g = n.parents[1]->grad_buffer();
      for (int r = 0; r < n.grad.rows; ++r)
        for (int c = 0; c < n.grad.cols; ++c) g.v[c] += n.grad(r, c);
    }
  });
}

Var scale(Tape& t, const Var& a, double s) {
  Matrix v = a->value;
  for (auto& x : v.v) x *= s;
  return t.make(std::move(v), "scale", {a}, [s](Node& n) { add_inplace(n.parents[0]->grad_buffer(), n.grad, s); });
}

Var mul(Tape& t, const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("ad::mul: shape mismatch");
  Matrix v = a->value;
  for (std::size_t i = 0; i < v.v.size(); ++i) v.v[i] *= b->value.v[i];
  return t.make(std::move(v), "mul", {a, b}, [](Node& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (needs(a)) {
      Matrix& g = a->grad_buffer();
      for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += n.grad.v[i] * b->value.v[i];
    }
    if (needs(b)) {
      Matrix& g = b->grad_buffer();
      for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += n.grad.v[i] * a->value.v[i];
    }
  });
}

Var sum(Tape& t, const Var& a) {
  Matrix v(1, 1);
  for (double x : a->value.v) v.v[0] += x;
  return t.make(std::move(v), "sum", {a}, [](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    for (auto& x : g.v) x += n.grad.v[0];
  });
}

Var gather_rows(Tape& t, const Var& a, const std::vector<int>* idx) {
  const Matrix& av = a->value;
  Matrix v(static_cast<int>(idx->size()), av.cols);
  for (int r = 0; r < v.rows; ++r) {
    int s = (*idx)[r];
    if (s >= 0) std::copy_n(av.row(s), av.cols, v.row(r));
  }
  return t.make(std::move(v), "gather_rows", {a}, [idx](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    for (int r = 0; r < n.grad.rows; ++r) {
      int s = (*idx)[r];
      if (s < 0) continue;
      double* gr = g.row(s);
      const double* nr = n.grad.row(r);
      for (int c = 0; c < g.cols; ++c) gr[c] += nr[c];
    }
  });
}

Var gather_linear(Tape& t, const Var& x, const std::vector<const std::vector<int>*>& idx, const std::vector<Var>& w,
                  const Var& bias, const std::vector<int>* bias_idx, int rows) {
  if (idx.size() != w.size()) throw std::invalid_argument("ad::gather_linear: class count mismatch");
  const Matrix& xv = x->value;
  const int din = xv.cols, dout = bias->value.cols;
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (w[c]->value.rows != din || w[c]->value.cols != dout || static_cast<int>(idx[c]->size()) != rows)
      throw std::invalid_argument("ad::gather_linear: shape mismatch");
  }
  Matrix v(rows, dout);
  for (int r = 0; r < rows; ++r) {
    double* vr = v.row(r);
    int b = (*bias_idx)[r];
    if (b >= 0) std::copy_n(bias->value.row(b), dout, vr);
    for (std::size_t c = 0; c < w.size(); ++c) {
      int s = (*idx[c])[r];
      if (s < 0) continue;
      const double* xr = xv.row(s);
      const Matrix& wm = w[c]->value;
      for (int a = 0; a < din; ++a) {
        const double xa = xr[a];
        const double* wr = wm.row(a);
        for (int j = 0; j < dout; ++j) vr[j] += xa * wr[j];
      }
    }
  }
  std::vector<Var> parents{x, bias};
  parents.insert(parents.end(), w.begin(), w.end());
  return t.make(std::move(v), "gather_linear", std::move(parents), [idx, bias_idx](Node& n) {
    const Var& x = n.parents[0];
    const Var& bias = n.parents[1];
    const int rows = n.grad.rows, dout = n.grad.cols;
    if (needs(bias)) {
      Matrix& g = bias->grad_buffer();
      for (int r = 0; r < rows; ++r) {
        int b = (*bias_idx)[r];
        if (b < 0) continue;
        const double* nr = n.grad.row(r);
        double* gr = g.row(b);
        for (int j = 0; j < dout; ++j) gr[j] += nr[j];
      }
    }
    for (std::size_t c = 0; c < idx.size(); ++c) {
      const Var& w = n.parents[2 + c];
      const int din = w->value.rows;
      Matrix* gx = needs(x) ? &x->grad_buffer() : nullptr;
      Matrix* gw = needs(w) ? &w->grad_buffer() : nullptr;
      for (int r = 0; r < rows; ++r) {
        int s = (*idx[c])[r];
        if (s < 0) continue;
        const double* nr = n.grad.row(r);
        const double* xr = x->value.row(s);
        for (int a = 0; a < din; ++a) {
          const double* wr = w->value.row(a);
          if (gw) {
            double* gwr = gw->row(a);
            for (int j = 0; j < dout; ++j) gwr[j] += xr[a] * nr[j];
          }
          if (gx) {
            double acc = 0.0;
            for (int j = 0; j < dout; ++j) acc += wr[j] * nr[j];
            gx->row(s)[a] += acc;
          }
        }
      }
    }
  });
}

Var scatter_add_rows(Tape& t, const Var& a, const std::vector<int>* idx, int rows) {
  const Matrix& av = a->value;
  if (static_cast<int>(idx->size()) != av.rows) throw std::invalid_argument("ad::scatter_add_rows: index size mismatch");
  Matrix v(rows, av.cols);
  for (int r = 0; r < av.rows; ++r) {
    int d = (*idx)[r];
    if (d < 0) continue;
    double* vr = v.row(d);
    const double* ar = av.row(r);
    for (int c = 0; c < av.cols; ++c) vr[c] += ar[c];
  }
  return t.make(std::move(v), "scatter_add_rows", {a}, [idx](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    for (int r = 0; r < g.rows; ++r) {
      int d = (*idx)[r];
      if (d < 0) continue;
      double* gr = g.row(r);
      const double* nr = n.grad.row(d);
      for (int c = 0; c < g.cols; ++c) gr[c] += nr[c];
    }
  });
}

Var gather_scatter(Tape& t, const Var& src, const Var& w, const PairList* pairs, int rows) {
  const Matrix& sv = src->value;
  const double* wv = w ? w->value.v.data() : nullptr;
  Matrix v(rows, sv.cols);
  std::size_t P = pairs->size();
  for (std::size_t p = 0; p < P; ++p) {
    const double* s = sv.row(pairs->src[p]);
    double* o = v.row(pairs->dst[p]);
    double a = wv ? wv[p] : 1.0;
    for (int c = 0; c < sv.cols; ++c) o[c] += a * s[c];
  }
  std::vector<Var> parents{src};
  if (w) parents.push_back(w);
  return t.make(std::move(v), "gather_scatter", std::move(parents), [pairs](Node& n) {
    auto& src = n.parents[0];
    const Var* w = n.parents.size() > 1 ? &n.parents[1] : nullptr;
    const double* wv = w ? (*w)->value.v.data() : nullptr;
    int cols = src->value.cols;
    std::size_t P = pairs->size();
    if (needs(src)) {
      Matrix& g = src->grad_buffer();
      for (std::size_t p = 0; p < P; ++p) {
        double a = wv ? wv[p] : 1.0;
        const double* gr = n.grad.row(pairs->dst[p]);
        double* o = g.row(pairs->src[p]);
        for (int c = 0; c < cols; ++c) o[c] += a * gr[c];
      }
    }
    if (w && needs(*w)) {
      Matrix& g = (*w)->grad_buffer();
      for (std::size_t p = 0; p < P; ++p) {
        const double* gr = n.grad.row(pairs->dst[p]);
        const double* s = src->value.row(pairs->src[p]);
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += gr[c] * s[c];
        g.v[p] += acc;
      }
    }
  });
}

Var pair_dot(Tape& t, const Var& q, const Var& k, const PairList* pairs, const std::vector<int>* qmap,
             const std::vector<int>* kmap, double scale) {
  if (q->value.cols != k->value.cols) throw std::invalid_argument("ad::pair_dot: width mismatch");
  std::size_t P = pairs->size();
  int d = q->value.cols;
  Matrix v(static_cast<int>(P), 1);
  auto qi = [=](std::size_t p) { return qmap ? (*qmap)[pairs->dst[p]] : pairs->dst[p]; };
  auto ki = [=](std::size_t p) { return kmap ? (*kmap)[pairs->src[p]] : pairs->src[p]; };
  for (std::size_t p = 0; p < P; ++p) {
    const double* a = q->value.row(qi(p));
    const double* b = k->value.row(ki(p));
    double acc = 0.0;
    for (int c = 0; c < d; ++c) acc += a[c] * b[c];
    v.v[p] = scale * acc;
  }
  return t.make(std::move(v), "pair_dot", {q, k}, [=](Node& n) {
    auto& q = n.parents[0];
    auto& k = n.parents[1];
    Matrix* gq = needs(q) ? &q->grad_buffer() : nullptr;
    Matrix* gk = needs(k) ? &k->grad_buffer() : nullptr;
    for (std::size_t p = 0; p < P; ++p) {
      double g = scale * n.grad.v[p];
      if (g == 0.0) continue;
      int a = qi(p), b = ki(p);
      if (gq) {
        double* o = gq->row(a);
        const double* kv = k->value.row(b);
        for (int c = 0; c < d; ++c) o[c] += g * kv[c];
      }
      if (gk) {
        double* o = gk->row(b);
        const double* qv = q->value.row(a);
        for (int c = 0; c < d; ++c) o[c] += g * qv[c];
      }
    }
  });
}

Var segment_softmax(Tape& t, const Var& s, const std::vector<int>* off) {
  Matrix v(s->value.rows, 1);
  std::size_t S = off->size() - 1;
  for (std::size_t g = 0; g < S; ++g) {
    int a = (*off)[g], b = (*off)[g + 1];
    if (a == b) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (int p = a; p < b; ++p) mx = std::max(mx, s->value.v[p]);
    double z = 0.0;
    for (int p = a; p < b; ++p) z += v.v[p] = std::exp(s->value.v[p] - mx);
    for (int p = a; p < b; ++p) v.v[p] /= z;
  }
  return t.make(std::move(v), "segment_softmax", {s}, [off, S](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    for (std::size_t k = 0; k < S; ++k) {
      int a = (*off)[k], b = (*off)[k + 1];
      double dot = 0.0;
      for (int p = a; p < b; ++p) dot += n.value.v[p] * n.grad.v[p];
      for (int p = a; p < b; ++p) g.v[p] += n.value.v[p] * (n.grad.v[p] - dot);
    }
  });
}

Var performer_features(Tape& t, const Var& x, const Matrix* w, double prescale, bool shift) {
  const Matrix& xv = x->value;
  int dK = w->rows, d = w->cols;
  if (xv.cols != d) throw std::invalid_argument("ad::performer_features: width mismatch");
  double c = prescale;
  Matrix xs = xv;
  for (auto& e : xs.v) e *= c;
  Matrix proj = matmul_nt(xs, *w);
  double mx = 0.0;
  if (shift && proj.size()) mx = *std::max_element(proj.v.begin(), proj.v.end());
  double norm = 1.0 / std::sqrt(static_cast<double>(dK));
  for (int r = 0; r < proj.rows; ++r) {
    double sq = 0.0;
    for (int j = 0; j < d; ++j) sq += xs(r, j) * xs(r, j);
    for (int q = 0; q < dK; ++q) proj(r, q) = std::exp(proj(r, q) - 0.5 * sq - mx) * norm;
  }
  return t.make(std::move(proj), "performer_features", {x}, [w, c, d, dK](Node& n) {
    auto& x = n.parents[0];
    Matrix& g = x->grad_buffer();
    for (int r = 0; r < n.value.rows; ++r) {
      const double* phi = n.value.row(r);
      const double* gr = n.grad.row(r);
      double tot = 0.0;
      double* o = g.row(r);
      for (int q = 0; q < dK; ++q) {
        double a = gr[q] * phi[q];
        tot += a;
        const double* wr = w->row(q);
        for (int j = 0; j < d; ++j) o[j] += c * a * wr[j];
      }
      const double* xr = x->value.row(r);
      for (int j = 0; j < d; ++j) o[j] -= c * tot * c * xr[j];
    }
  });
}

Var elu1(Tape& t, const Var& x) {
  Matrix v = x->value;
  for (auto& e : v.v) e = e > 0 ? e + 1.0 : std::exp(e);
  return t.make(std::move(v), "elu1", {x}, [](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    const auto& xv = n.parents[0]->value.v;
    for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += n.grad.v[i] * (xv[i] > 0 ? 1.0 : n.value.v[i]);
  });
}

Var kernel_aggregate(Tape& t, const Var& phi_q, const Var& phi_k, const Var& v, const std::vector<int>* key_group,
                     const std::vector<int>* query_group, int G, bool normalize) {
  const Matrix& Q = phi_q->value;
  const Matrix& K = phi_k->value;
  const Matrix& V = v->value;
  int dK = Q.cols, dH = V.cols;
  if (K.cols != dK || K.rows != V.rows || static_cast<int>(key_group->size()) != K.rows ||
      static_cast<int>(query_group->size()) != Q.rows)
    throw std::invalid_argument("ad::kernel_aggregate: shape mismatch");
  auto S = std::make_shared<std::vector<double>>(static_cast<std::size_t>(G) * dK * dH, 0.0);
  auto z = std::make_shared<std::vector<double>>(static_cast<std::size_t>(G) * dK, 0.0);
  for (int i = 0; i < K.rows; ++i) {
    int gi = (*key_group)[i];
    if (gi < 0) continue;
    const double* kr = K.row(i);
    const double* vr = V.row(i);
    double* Sg = S->data() + static_cast<std::size_t>(gi) * dK * dH;
    double* zg = z->data() + static_cast<std::size_t>(gi) * dK;
    for (int a = 0; a < dK; ++a) {
      zg[a] += kr[a];
      double* Sa = Sg + static_cast<std::size_t>(a) * dH;
      for (int b = 0; b < dH; ++b) Sa[b] += kr[a] * vr[b];
    }
  }
  Matrix out(Q.rows, dH);
  auto den = std::make_shared<std::vector<double>>(Q.rows, 1.0);
  for (int q = 0; q < Q.rows; ++q) {
    int gq = (*query_group)[q];
    if (gq < 0) continue;
    const double* qr = Q.row(q);
    const double* Sg = S->data() + static_cast<std::size_t>(gq) * dK * dH;
    const double* zg = z->data() + static_cast<std::size_t>(gq) * dK;
    double* o = out.row(q);
    double dn = 0.0;
    for (int a = 0; a < dK; ++a) {
      dn += qr[a] * zg[a];
      const double* Sa = Sg + static_cast<std::size_t>(a) * dH;
      for (int b = 0; b < dH; ++b) o[b] += qr[a] * Sa[b];
    }
    if (normalize) {
      if (dn <= 0.0) {
        std::fill(o, o + dH, 0.0);
        dn = 0.0;
      } else {
        for (int b = 0; b < dH; ++b) o[b] /= dn;
      }
    }
    (*den)[q] = dn;
  }
  return t.make(std::move(out), "kernel_aggregate", {phi_q, phi_k, v},
                [S, z, den, key_group, query_group, G, dK, dH, normalize](Node& n) {
                  auto& pq = n.parents[0];
                  auto& pk = n.parents[1];
                  auto& pv = n.parents[2];
                  const Matrix& Q = pq->value;
                  std::vector<double> dS(static_cast<std::size_t>(G) * dK * dH, 0.0);
                  std::vector<double> dz(static_cast<std::size_t>(G) * dK, 0.0);
                  Matrix* gq = needs(pq) ? &pq->grad_buffer() : nullptr;
                  std::vector<double> dnum(dH);
                  for (int q = 0; q < Q.rows; ++q) {
                    int g = (*query_group)[q];
                    if (g < 0) continue;
                    double dn = (*den)[q];
                    if (normalize && dn <= 0.0) continue;
                    const double* gr = n.grad.row(q);
                    const double* out = n.value.row(q);
                    double dden = 0.0;
                    if (normalize) {
                      for (int b = 0; b < dH; ++b) {
                        dnum[b] = gr[b] / dn;
                        dden -= gr[b] * out[b] / dn;
                      }
                    } else {
                      for (int b = 0; b < dH; ++b) dnum[b] = gr[b];
                    }
                    const double* qr = Q.row(q);
                    const double* Sg = S->data() + static_cast<std::size_t>(g) * dK * dH;
                    const double* zg = z->data() + static_cast<std::size_t>(g) * dK;
                    double* dSg = dS.data() + static_cast<std::size_t>(g) * dK * dH;
                    double* dzg = dz.data() + static_cast<std::size_t>(g) * dK;
                    for (int a = 0; a < dK; ++a) {
                      const double* Sa = Sg + static_cast<std::size_t>(a) * dH;
                      double* dSa = dSg + static_cast<std::size_t>(a) * dH;
                      double acc = 0.0;
                      for (int b = 0; b < dH; ++b) {
                        acc += Sa[b] * dnum[b];
                        dSa[b] += qr[a] * dnum[b];
                      }
                      if (normalize) {
                        acc += zg[a] * dden;
                        dzg[a] += qr[a] * dden;
                      }
                      if (gq) (*gq)(q, a) += acc;
                    }
                  }
                  Matrix* gk = needs(pk) ? &pk->grad_buffer() : nullptr;
                  Matrix* gv = needs(pv) ? &pv->grad_buffer() : nullptr;
                  const Matrix& K = pk->value;
                  const Matrix& V = pv->value;
                  for (int i = 0; i < K.rows; ++i) {
                    int g = (*key_group)[i];
                    if (g < 0) continue;
                    const double* dSg = dS.data() + static_cast<std::size_t>(g) * dK * dH;
                    const double* dzg = dz.data() + static_cast<std::size_t>(g) * dK;
                    const double* kr = K.row(i);
                    const double* vr = V.row(i);
                    for (int a = 0; a < dK; ++a) {
                      const double* dSa = dSg + static_cast<std::size_t>(a) * dH;
                      if (gk) {
                        double acc = dzg[a];
                        for (int b = 0; b < dH; ++b) acc += dSa[b] * vr[b];
                        (*gk)(i, a) += acc;
                      }
                      if (gv) {
                        double* o = gv->row(i);
                        for (int b = 0; b < dH; ++b) o[b] += dSa[b] * kr[a];
                      }
                    }
                  }
                });
}

Var layer_norm(Tape& t, const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Matrix& xv = x->value;
  int C = xv.cols;
  if (gamma->value.cols != C || beta->value.cols != C) throw std::invalid_argument("ad::layer_norm: width mismatch");
  Matrix v(xv.rows, C);
  auto xhat = std::make_shared<Matrix>(xv.rows, C);
  auto inv = std::make_shared<std::vector<double>>(xv.rows);
  for (int r = 0; r < xv.rows; ++r) {
    const double* xr = xv.row(r);
    double mean = 0.0;
    for (int c = 0; c < C; ++c) mean += xr[c];
    mean /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= C;
    double is = 1.0 / std::sqrt(var + eps);
    (*inv)[r] = is;
    for (int c = 0; c < C; ++c) {
      double h = (xr[c] - mean) * is;
      (*xhat)(r, c) = h;
      v(r, c) = gamma->value.v[c] * h + beta->value.v[c];
    }
  }
  return t.make(std::move(v), "layer_norm", {x, gamma, beta}, [xhat, inv, C](Node& n) {
    auto& x = n.parents[0];
    auto& gm = n.parents[1];
    auto& bt = n.parents[2];
    Matrix* gx = needs(x) ? &x->grad_buffer() : nullptr;
    Matrix* gg = needs(gm) ? &gm->grad_buffer() : nullptr;
    Matrix* gb = needs(bt) ? &bt->grad_buffer() : nullptr;
    std::vector<double> gh(C);
    for (int r = 0; r < n.grad.rows; ++r) {
      const double* gr = n.grad.row(r);
      const double* h = xhat->row(r);
      double m1 = 0.0, m2 = 0.0;
      for (int c = 0; c < C; ++c) {
        gh[c] = gr[c] * gm->value.v[c];
        m1 += gh[c];
        m2 += gh[c] * h[c];
        if (gg) gg->v[c] += gr[c] * h[c];
        if (gb) gb->v[c] += gr[c];
      }
      m1 /= C;
      m2 /= C;
      if (gx) {
        double* o = gx->row(r);
        for (int c = 0; c < C; ++c) o[c] += (*inv)[r] * (gh[c] - m1 - h[c] * m2);
      }
    }
  });
}

Var batch_norm(Tape& t, const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Matrix& xv = x->value;
  int R = xv.rows, C = xv.cols;
  if (R == 0) throw std::invalid_argument("ad::batch_norm: empty batch");
  auto xhat = std::make_shared<Matrix>(R, C);
  auto inv = std::make_shared<std::vector<double>>(C);
  Matrix v(R, C);
  for (int c = 0; c < C; ++c) {
    double mean = 0.0, var = 0.0;
    for (int r = 0; r < R; ++r) mean += xv(r, c);
    mean /= R;
    for (int r = 0; r < R; ++r) var += (xv(r, c) - mean) * (xv(r, c) - mean);
    var /= R;
    double is = 1.0 / std::sqrt(var + eps);
    (*inv)[c] = is;
    for (int r = 0; r < R; ++r) {
      double h = (xv(r, c) - mean) * is;
      (*xhat)(r, c) = h;
      v(r, c) = gamma->value.v[c] * h + beta->value.v[c];
    }
  }
  return t.make(std::move(v), "batch_norm", {x, gamma, beta}, [xhat, inv, R, C](Node& n) {
    auto& x = n.parents[0];
    auto& gm = n.parents[1];
    auto& bt = n.parents[2];
    for (int c = 0; c < C; ++c) {
      double m1 = 0.0, m2 = 0.0, sg = 0.0, sb = 0.0;
      for (int r = 0; r < R; ++r) {
        double g = n.grad(r, c);
        double gh = g * gm->value.v[c];
        m1 += gh;
        m2 += gh * (*xhat)(r, c);
        sg += g * (*xhat)(r, c);
        sb += g;
      }
      m1 /= R;
      m2 /= R;
      if (needs(gm)) gm->grad_buffer().v[c] += sg;
      if (needs(bt)) bt->grad_buffer().v[c] += sb;
      if (needs(x)) {
        Matrix& gx = x->grad_buffer();
        for (int r = 0; r < R; ++r)
          gx(r, c) += (*inv)[c] * (n.grad(r, c) * gm->value.v[c] - m1 - (*xhat)(r, c) * m2);
      }
    }
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu_value(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_derivative(double x) {
  double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

Var gelu(Tape& t, const Var& x) {
  Matrix v = x->value;
  for (auto& e : v.v) e = gelu_value(e);
  return t.make(std::move(v), "gelu", {x}, [](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    const auto& xv = n.parents[0]->value.v;
    for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += n.grad.v[i] * gelu_derivative(xv[i]);
  });
}

Var relu(Tape& t, const Var& x) {
  Matrix v = x->value;
  for (auto& e : v.v) e = e > 0 ? e : 0.0;
  return t.make(std::move(v), "relu", {x}, [](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    const auto& xv = n.parents[0]->value.v;
    for (std::size_t i = 0; i < g.v.size(); ++i)
      if (xv[i] > 0) g.v[i] += n.grad.v[i];
  });
}

Var dropout(Tape& t, const Var& x, double rate) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("ad::dropout: rate must be < 1");
  auto mask = std::make_shared<std::vector<double>>(x->value.size());
  std::bernoulli_distribution keep(1.0 - rate);
  double s = 1.0 / (1.0 - rate);
  Matrix v = x->value;
  for (std::size_t i = 0; i < v.v.size(); ++i) {
    (*mask)[i] = keep(t.rng()) ? s : 0.0;
    v.v[i] *= (*mask)[i];
  }
  return t.make(std::move(v), "dropout", {x}, [mask](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += n.grad.v[i] * (*mask)[i];
  });
}

Var concat_cols(Tape& t, const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("ad::concat_cols: no inputs");
  int R = xs[0]->value.rows, C = 0;
  for (auto& x : xs) {
    if (x->value.rows != R) throw std::invalid_argument("ad::concat_cols: row mismatch");
    C += x->value.cols;
  }
  Matrix v(R, C);
  int off = 0;
  for (auto& x : xs) {
    for (int r = 0; r < R; ++r) std::copy_n(x->value.row(r), x->value.cols, v.row(r) + off);
    off += x->value.cols;
  }
  return t.make(std::move(v), "concat_cols", xs, [](Node& n) {
    int off = 0;
    for (auto& p : n.parents) {
      int c = p->value.cols;
      if (needs(p)) {
        Matrix& g = p->grad_buffer();
        for (int r = 0; r < g.rows; ++r)
          for (int j = 0; j < c; ++j) g(r, j) += n.grad(r, off + j);
      }
      off += c;
    }
  });
}

Var slice_cols(Tape& t, const Var& x, int c0, int c1) {
  const Matrix& xv = x->value;
  if (c0 < 0 || c1 > xv.cols || c0 > c1) throw std::invalid_argument("ad::slice_cols: bad range");
  Matrix v(xv.rows, c1 - c0);
  for (int r = 0; r < xv.rows; ++r) std::copy(xv.row(r) + c0, xv.row(r) + c1, v.row(r));
  return t.make(std::move(v), "slice_cols", {x}, [c0](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    for (int r = 0; r < n.grad.rows; ++r)
      for (int j = 0; j < n.grad.cols; ++j) g(r, c0 + j) += n.grad(r, j);
  });
}

Var softmax_cross_entropy(Tape& t, const Var& logits, const std::vector<int>* labels) {
  const Matrix& z = logits->value;
  if (static_cast<int>(labels->size()) != z.rows || z.rows == 0)
    throw std::invalid_argument("ad::softmax_cross_entropy: label count mismatch");
  auto prob = std::make_shared<Matrix>(z.rows, z.cols);
  double loss = 0.0;
  for (int r = 0; r < z.rows; ++r) {
    const double* zr = z.row(r);
    double mx = *std::max_element(zr, zr + z.cols);
    double s = 0.0;
    for (int c = 0; c < z.cols; ++c) s += (*prob)(r, c) = std::exp(zr[c] - mx);
    for (int c = 0; c < z.cols; ++c) (*prob)(r, c) /= s;
    loss -= zr[(*labels)[r]] - mx - std::log(s);
  }
  Matrix v(1, 1, loss / z.rows);
  return t.make(std::move(v), "softmax_cross_entropy", {logits}, [prob, labels](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    double s = n.grad.v[0] / g.rows;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) g(r, c) += s * ((*prob)(r, c) - (c == (*labels)[r] ? 1.0 : 0.0));
  });
}

Var bce_with_logits(Tape& t, const Var& z, const std::vector<int>* labels) {
  const Matrix& zv = z->value;
  if (zv.cols != 1 || static_cast<int>(labels->size()) != zv.rows || zv.rows == 0)
    throw std::invalid_argument("ad::bce_with_logits: shape mismatch");
  double loss = 0.0;
  for (int r = 0; r < zv.rows; ++r) {
    double x = zv.v[r], y = (*labels)[r];
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  Matrix v(1, 1, loss / zv.rows);
  return t.make(std::move(v), "bce_with_logits", {z}, [labels](Node& n) {
    Matrix& g = n.parents[0]->grad_buffer();
    double s = n.grad.v[0] / g.rows;
    const auto& zv = n.parents[0]->value.v;
    for (int r = 0; r < g.rows; ++r) g.v[r] += s * (1.0 / (1.0 + std::exp(-zv[r])) - (*labels)[r]);
  });
}

}  // namespace ad

FdResult fd_check(const std::function<Var(Tape&)>& fn, const std::vector<Matrix*>& points,
                  std::size_t max_entries, std::uint64_t seed, double resolved_floor) {
  Tape tape(true);
  Var out = fn(tape);
  if (out->value.size() != 1) throw std::invalid_argument("fd_check: fn must be scalar");
  tape.backward(out);
  std::vector<Matrix> grads;
  for (auto* p : points) grads.push_back(tape.grad_of(p));
  auto eval = [&] {
    Tape t(false);
    return fn(t)->value.v[0];
  };
  FdResult res;
  std::mt19937_64 rng(seed);
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    Matrix& p = *points[pi];
    std::vector<std::size_t> entries(p.size());
    std::iota(entries.begin(), entries.end(), 0);
    if (max_entries && entries.size() > max_entries) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(max_entries);
    }
    for (std::size_t e : entries) {
      double x0 = p.v[e];
      double h = 1e-5 * std::max(1.0, std::abs(x0));
      p.v[e] = x0 + h;
      double fp = eval();
      p.v[e] = x0 - h;
      double fm = eval();
      p.v[e] = x0;
      double num = (fp - fm) / (2 * h);
      double ana = grads[pi].v[e];
      double abs_err = std::abs(ana - num);
      double rel = abs_err / std::max({std::abs(ana), std::abs(num), 1e-8});
      res.max_abs_err = std::max(res.max_abs_err, abs_err);
      std::string where = "point " + std::to_string(pi) + " entry " + std::to_string(e);
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = where;
      }
      if (std::max(std::abs(ana), std::abs(num)) >= resolved_floor) {
        if (rel > res.max_rel_err_resolved) {
          res.max_rel_err_resolved = rel;
          res.worst_resolved = where;
        }
      } else {
        ++res.unresolved;
        res.max_abs_err_unresolved = std::max(res.max_abs_err_unresolved, abs_err);
      }
      ++res.checked;
    }
  }
  return res;
}

void ParamStore::bind(std::vector<Matrix*> ps, std::vector<std::string> ns) {
  params = std::move(ps);
  names = std::move(ns);
  names.resize(params.size());
  grads.clear();
  m1.clear();
  m2.clear();
  for (auto* p : params) {
    grads.emplace_back(p->rows, p->cols);
    m1.emplace_back(p->rows, p->cols);
    m2.emplace_back(p->rows, p->cols);
  }
  step = 0;
}

void ParamStore::zero_grad() {
  for (auto& g : grads) std::fill(g.v.begin(), g.v.end(), 0.0);
}

std::vector<Matrix> ParamStore::collect(const Tape& tape) const {
  std::vector<Matrix> out;
  for (auto* p : params) out.push_back(tape.grad_of(p));
  return out;
}

void ParamStore::accumulate(const Tape& tape, double scale) { accumulate(collect(tape), scale); }

void ParamStore::accumulate(const std::vector<Matrix>& g, double scale) {
  if (g.size() != grads.size()) throw std::invalid_argument("ParamStore::accumulate: count mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) add_inplace(grads[i], g[i], scale);
}

void adam_step(ParamStore& s, double lr, double beta1, double beta2, double eps) {
  for (std::size_t i = 0; i < s.params.size(); ++i)
    for (std::size_t e = 0; e < s.grads[i].size(); ++e)
      if (!std::isfinite(s.grads[i].v[e]))
        throw std::runtime_error("adam_step: non-finite gradient in parameter '" + s.names[i] + "' (index " +
                                 std::to_string(i) + ", entry " + std::to_string(e) + ")");
  ++s.step;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.step));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    Matrix& p = *s.params[i];
    if (!p.same_shape(s.grads[i])) throw std::invalid_argument("adam_step: shape mismatch");
    for (std::size_t e = 0; e < p.size(); ++e) {
      double g = s.grads[i].v[e];
      double& m = s.m1[i].v[e];
      double& v = s.m2[i].v[e];
      m = beta1 * m + (1 - beta1) * g;
      v = beta2 * v + (1 - beta2) * g * g;
      p.v[e] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
    }
  }
}

}  // namespace hot
