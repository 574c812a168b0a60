#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "hot/experiments.hpp"
#include "hot/rng.hpp"

namespace hot {

namespace {

Matrix glorot(int in, int out, std::mt19937_64& rng) {
  Matrix w(in, out);
  double bound = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& x : w.v) x = u(rng);
  return w;
}

// Column mean and unbiased variance.
std::pair<Matrix, Matrix> column_stats(const Matrix& h) {
  Matrix mean(1, h.cols), var(1, h.cols);
  for (int r = 0; r < h.rows; ++r)
    for (int c = 0; c < h.cols; ++c) mean.v[c] += h(r, c);
  for (auto& m : mean.v) m /= h.rows;
  for (int r = 0; r < h.rows; ++r)
    for (int c = 0; c < h.cols; ++c) var.v[c] += (h(r, c) - mean.v[c]) * (h(r, c) - mean.v[c]);
  for (auto& v : var.v) v /= std::max(1, h.rows - 1);
  return {std::move(mean), std::move(var)};
}

// Affine normalization with fixed statistics; gradients reach h only.
Var bn_eval(Tape& t, const Var& h, const Matrix& gamma, const Matrix& beta, const Matrix& mean, const Matrix& var) {
  int C = h->value.cols;
  Matrix scale(C, C), shift(1, C);
  for (int c = 0; c < C; ++c) {
    double s = gamma.v[c] / std::sqrt(var.v[c] + 1e-5);
    scale(c, c) = s;
    shift.v[c] = beta.v[c] - mean.v[c] * s;
  }
  return ad::add_row(t, ad::matmul(t, h, t.constant(std::move(scale))), t.constant(std::move(shift)));
}

struct MlpPiPlan {
  LinearPlan p1, p2;
};

}  // namespace

MlpPiClassifier::MlpPiClassifier(int d_in, int width, std::uint64_t seed) {
  l1 = LinearEquivariant::make(2, 2, d_in, width, ClassSetMode::Full);
  l2 = LinearEquivariant::make(2, 1, width, width, ClassSetMode::Full);
  init_params(l1, derive_seed(seed, {1}));
  init_params(l2, derive_seed(seed, {2}));
  std::mt19937_64 rng(derive_seed(seed, {3}));
  head_w = glorot(width, 2, rng);
  head_b = Matrix(1, 2);
}

std::any MlpPiClassifier::prepare(const Chain& c) const {
  auto p = std::make_shared<MlpPiPlan>();
  const EdgeSet& e = c.tensor.edges;
  p->p1 = build_linear_plan(e, e, l1.classes);
  p->p2 = build_linear_plan(e, output_edges(e, 1), l2.classes);
  return std::shared_ptr<const MlpPiPlan>(std::move(p));
}

Var MlpPiClassifier::forward(Tape& t, const Chain& c, const std::any& plan, bool, std::any*) const {
  auto& p = *std::any_cast<const std::shared_ptr<const MlpPiPlan>&>(plan);
  Var h = ad::relu(t, linear_forward(t, l1, t.constant(c.tensor.values), p.p1));
  h = ad::relu(t, linear_forward(t, l2, h, p.p2));
  return ad::add_row(t, ad::matmul(t, h, t.param(head_w)), t.param(head_b));
}

std::vector<Matrix*> MlpPiClassifier::parameters() {
  auto ps = l1.parameters();
  for (auto* p : l2.parameters()) ps.push_back(p);
  ps.push_back(&head_w);
  ps.push_back(&head_b);
  return ps;
}

std::vector<std::string> MlpPiClassifier::parameter_names() const {
  std::vector<std::string> n;
  for (std::size_t i = 0; i < l1.weights.size(); ++i) n.push_back("l1.w" + std::to_string(i));
  n.push_back("l1.bias");
  for (std::size_t i = 0; i < l2.weights.size(); ++i) n.push_back("l2.w" + std::to_string(i));
  n.push_back("l2.bias");
  n.push_back("head.w");
  n.push_back("head.b");
  return n;
}

GnnParams GnnParams::make(GnnKind kind, int d_in, int width, int layers, std::uint64_t seed) {
  GnnParams p;
  p.kind = kind;
  p.d_in = d_in;
  p.width = width;
  p.layers = layers;
  std::mt19937_64 rng(derive_seed(seed, {0x6e}));
  int mats = kind == GnnKind::Gcn ? 1 : 2;
  for (int l = 0; l < layers; ++l) {
    p.w.emplace_back();
    p.b.emplace_back();
    p.gamma.emplace_back();
    p.beta.emplace_back();
    p.running_mean.emplace_back();
    p.running_var.emplace_back();
    for (int s = 0; s < mats; ++s) {
      int in = (l == 0 && s == 0) ? d_in : width;
      p.w[l].push_back(glorot(in, width, rng));
      p.b[l].push_back(Matrix(1, width));
      if (kind == GnnKind::Gin0) {
        p.gamma[l].push_back(Matrix(1, width, 1.0));
        p.beta[l].push_back(Matrix(1, width));
        p.running_mean[l].push_back(Matrix(1, width));
        p.running_var[l].push_back(Matrix(1, width, 1.0));
      }
    }
  }
  p.head_w = glorot(width, 2, rng);
  p.head_b = Matrix(1, 2);
  return p;
}

std::vector<Matrix*> GnnParams::parameters() {
  std::vector<Matrix*> ps;
  for (int l = 0; l < layers; ++l)
    for (std::size_t s = 0; s < w[l].size(); ++s) {
      ps.push_back(&w[l][s]);
      ps.push_back(&b[l][s]);
      if (kind == GnnKind::Gin0) {
        ps.push_back(&gamma[l][s]);
        ps.push_back(&beta[l][s]);
      }
    }
  ps.push_back(&head_w);
  ps.push_back(&head_b);
  return ps;
}

GnnPlan gnn_plan(const Graph& g, GnnKind kind) {
  std::vector<int> deg(g.n, 1);
  for (auto& e : g.edges) {
    if (e[0] < 0 || e[1] < 0 || e[0] >= g.n || e[1] >= g.n) throw std::invalid_argument("gnn_plan: dangling edge");
    ++deg[e[1]];
  }
  GnnPlan p;
  for (int j = 0; j < g.n; ++j) {
    p.pairs.src.push_back(j);
    p.pairs.dst.push_back(j);
  }
  for (auto& e : g.edges) {
    p.pairs.src.push_back(e[0]);
    p.pairs.dst.push_back(e[1]);
  }
  if (kind == GnnKind::Gcn) {
    p.weight = Matrix(static_cast<int>(p.pairs.size()), 1);
    for (std::size_t q = 0; q < p.pairs.size(); ++q)
      p.weight.v[q] = 1.0 / std::sqrt(static_cast<double>(deg[p.pairs.src[q]]) * deg[p.pairs.dst[q]]);
  }
  return p;
}

Matrix gnn_input(const Chain& c) {
  Matrix x(c.n, 3);
  for (int i = 0; i < c.n; ++i) {
    x(i, 0) = c.node_x(i, 0);
    x(i, 1) = c.node_x(i, 1);
    x(i, 2) = 1.0;
  }
  return x;
}

Var gcn_forward(Tape& t, const GnnParams& p, const Var& x, const GnnPlan& plan) {
  int n = x->value.rows;
  Var w = t.constant(plan.weight);
  Var h = x;
  for (int l = 0; l < p.layers; ++l) {
    Var agg = ad::gather_scatter(t, h, w, &plan.pairs, n);
    h = ad::relu(t, ad::add_row(t, ad::matmul(t, agg, t.param(p.w[l][0])), t.param(p.b[l][0])));
  }
  return ad::add_row(t, ad::matmul(t, h, t.param(p.head_w)), t.param(p.head_b));
}

Var gin0_forward(Tape& t, const GnnParams& p, const Var& x, const GnnPlan& plan, bool train,
                 std::vector<Matrix>* stats) {
  int n = x->value.rows;
  Var h = x;
  for (int l = 0; l < p.layers; ++l) {
    h = ad::gather_scatter(t, h, nullptr, &plan.pairs, n);
    for (int s = 0; s < 2; ++s) {
      h = ad::add_row(t, ad::matmul(t, h, t.param(p.w[l][s])), t.param(p.b[l][s]));
      if (train) {
        if (stats) {
          auto [mean, var] = column_stats(h->value);
          stats->push_back(std::move(mean));
          stats->push_back(std::move(var));
        }
        h = ad::batch_norm(t, h, t.param(p.gamma[l][s]), t.param(p.beta[l][s]));
      } else {
        h = bn_eval(t, h, p.gamma[l][s], p.beta[l][s], p.running_mean[l][s], p.running_var[l][s]);
      }
      h = ad::relu(t, h);
    }
  }
  return ad::add_row(t, ad::matmul(t, h, t.param(p.head_w)), t.param(p.head_b));
}

std::any GnnClassifier::prepare(const Chain& c) const {
  return std::make_shared<const GnnPlan>(gnn_plan(c.graph, p.kind));
}

Var GnnClassifier::forward(Tape& t, const Chain& c, const std::any& plan, bool train, std::any* aux) const {
  auto& g = *std::any_cast<const std::shared_ptr<const GnnPlan>&>(plan);
  Var x = t.constant(gnn_input(c));
  if (p.kind == GnnKind::Gcn) return gcn_forward(t, p, x, g);
  std::vector<Matrix> stats;
  Var out = gin0_forward(t, p, x, g, train, &stats);
  if (aux && train) *aux = std::move(stats);
  return out;
}

void GnnClassifier::after_batch(const std::vector<std::any>& aux) {
  if (p.kind != GnnKind::Gin0) return;
  for (auto& a : aux) {
    if (!a.has_value()) continue;
    auto& stats = std::any_cast<const std::vector<Matrix>&>(a);
    std::size_t q = 0;
    for (int l = 0; l < p.layers; ++l)
      for (std::size_t s = 0; s < p.running_mean[l].size(); ++s) {
        for (int c = 0; c < p.width; ++c) {
          auto& rm = p.running_mean[l][s].v[c];
          auto& rv = p.running_var[l][s].v[c];
          rm = (1 - p.momentum) * rm + p.momentum * stats[q].v[c];
          rv = (1 - p.momentum) * rv + p.momentum * stats[q + 1].v[c];
        }
        q += 2;
      }
  }
}

std::vector<std::string> GnnClassifier::parameter_names() const {
  std::vector<std::string> n;
  for (int l = 0; l < p.layers; ++l)
    for (std::size_t s = 0; s < p.w[l].size(); ++s) {
      std::string pre = "layer" + std::to_string(l) + ".lin" + std::to_string(s) + ".";
      n.push_back(pre + "w");
      n.push_back(pre + "b");
      if (p.kind == GnnKind::Gin0) {
        n.push_back(pre + "bn.gamma");
        n.push_back(pre + "bn.beta");
      }
    }
  n.push_back("head.w");
  n.push_back("head.b");
  return n;
}

}  // namespace hot
