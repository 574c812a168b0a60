#include "hot/encoder.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "hot/binio.hpp"
#include "hot/rng.hpp"

namespace hot {

void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = {{"k", s.k},           {"l", s.l},           {"d_in", s.d_in},
       {"d_out", s.d_out},   {"d_H", s.d_H},       {"H", s.H},
       {"d_F", s.d_F},       {"kernel", to_string(s.kernel)},
       {"d_K", s.d_K},       {"normalize", s.normalize},
       {"force_unit_alpha", s.force_unit_alpha}, {"bypass_norm", s.bypass_norm},
       {"dropout", s.dropout}, {"classes", s.classes}};
}

void from_json(const nlohmann::json& j, LayerSpec& s) {
  s.k = j.at("k");
  s.l = j.at("l");
  s.d_in = j.at("d_in");
  s.d_out = j.at("d_out");
  s.d_H = j.at("d_H");
  s.H = j.at("H");
  s.d_F = j.value("d_F", 0);
  s.kernel = kernel_kind_from_string(j.value("kernel", std::string("softmax")));
  s.d_K = j.value("d_K", 32);
  s.normalize = j.value("normalize", true);
  s.force_unit_alpha = j.value("force_unit_alpha", false);
  s.bypass_norm = j.value("bypass_norm", false);
  s.dropout = j.value("dropout", 0.0);
  s.classes = j.value("classes", std::vector<std::vector<int>>{});
}

void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = {{"layers", s.layers}, {"final_norm", s.final_norm}, {"out_dim", s.out_dim}};
}

void from_json(const nlohmann::json& j, ModelSpec& s) {
  s.layers = j.at("layers").get<std::vector<LayerSpec>>();
  s.final_norm = j.value("final_norm", true);
  s.out_dim = j.value("out_dim", 0);
}

LayerNormParams LayerNormParams::make(int d) { return {Matrix(1, d, 1.0), Matrix(1, d, 0.0)}; }

EncoderLayer EncoderLayer::make(const LayerSpec& s, std::uint64_t seed) {
  if (s.d_in <= 0 || s.d_out <= 0 || s.d_H <= 0) throw std::invalid_argument("EncoderLayer: widths must be positive");
  EncoderLayer e;
  e.k = s.k;
  e.l = s.l;
  e.d_in = s.d_in;
  e.d_out = s.d_out;
  e.d_F = s.d_F ? s.d_F : s.d_out;
  std::vector<EquivalenceClass> cls;
  for (auto& r : s.classes) cls.emplace_back(Partition(r), s.k, s.l);
  auto km = KernelMap::make(s.kernel, s.d_K, s.d_H, derive_seed(seed, {10}));
  e.attn = AttentionParams::make(s.k, s.l, s.d_in, s.d_out, s.H, s.d_H, std::move(km), std::move(cls),
                                 derive_seed(seed, {11}));
  e.attn.force_unit_alpha = s.force_unit_alpha;
  e.attn.normalize = s.normalize;
  e.attn.dropout = s.dropout;
  auto mode = s.l == 0 ? ClassSetMode::Full : ClassSetMode::Lightweight;
  e.mlp1 = LinearEquivariant::make(s.l, s.l, s.d_out, e.d_F, mode);
  e.mlp2 = LinearEquivariant::make(s.l, s.l, e.d_F, s.d_out, mode);
  init_params(e.mlp1, derive_seed(seed, {12}));
  init_params(e.mlp2, derive_seed(seed, {13}));
  e.ln1 = LayerNormParams::make(s.d_in);
  e.ln2 = LayerNormParams::make(s.d_out);
  e.bypass_norm = s.bypass_norm;
  e.dropout = s.dropout;
  return e;
}

std::vector<Matrix*> EncoderLayer::parameters() {
  auto ps = attn.parameters();
  for (auto* p : mlp1.parameters()) ps.push_back(p);
  for (auto* p : mlp2.parameters()) ps.push_back(p);
  for (auto* p : {&ln1.gamma, &ln1.beta, &ln2.gamma, &ln2.beta}) ps.push_back(p);
  return ps;
}

std::size_t EncoderLayer::parameter_count() const {
  return attn.parameter_count() + mlp1.parameter_count() + mlp2.parameter_count() + 2 * (d_in + d_out);
}

std::vector<Matrix*> Model::parameters() {
  std::vector<Matrix*> ps;
  for (auto& l : layers)
    for (auto* p : l.parameters()) ps.push_back(p);
  if (spec.final_norm) {
    ps.push_back(&final_ln.gamma);
    ps.push_back(&final_ln.beta);
  }
  if (spec.out_dim > 0) {
    ps.push_back(&head_w);
    ps.push_back(&head_b);
  }
  return ps;
}

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t t = 0; t < layers.size(); ++t) {
    const auto& L = layers[t];
    std::string pre = "layer" + std::to_string(t) + ".";
    for (int h = 0; h < L.attn.H; ++h)
      for (std::size_t c = 0; c < L.attn.classes.size(); ++c) {
        std::string b = pre + "attn.h" + std::to_string(h) + "." + L.attn.classes[c].to_string() + ".";
        const auto& hb = L.attn.at(h, static_cast<int>(c));
        for (std::size_t w = 0; w < hb.query.weights.size(); ++w) names.push_back(b + "query.w" + std::to_string(w));
        names.push_back(b + "query.bias");
        for (std::size_t w = 0; w < hb.key.weights.size(); ++w) names.push_back(b + "key.w" + std::to_string(w));
        names.push_back(b + "key.bias");
        names.push_back(b + "w_v");
        names.push_back(b + "w_o");
      }
    for (const char* m : {"mlp1", "mlp2"}) {
      const auto& lin = std::string(m) == "mlp1" ? L.mlp1 : L.mlp2;
      for (std::size_t w = 0; w < lin.weights.size(); ++w) names.push_back(pre + m + ".w" + std::to_string(w));
      names.push_back(pre + m + ".bias");
    }
    for (const char* n : {"ln1.gamma", "ln1.beta", "ln2.gamma", "ln2.beta"}) names.push_back(pre + n);
  }
  if (spec.final_norm) {
    names.push_back("final_ln.gamma");
    names.push_back("final_ln.beta");
  }
  if (spec.out_dim > 0) {
    names.push_back("head.w");
    names.push_back("head.b");
  }
  return names;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (auto& l : layers) n += l.parameter_count();
  if (spec.final_norm) n += final_ln.gamma.size() + final_ln.beta.size();
  if (spec.out_dim > 0) n += head_w.size() + head_b.size();
  return n;
}

Model build_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.layers.empty()) throw std::invalid_argument("build_model: no layers");
  Model m;
  m.spec = spec;
  m.seed = seed;
  for (std::size_t t = 0; t < spec.layers.size(); ++t) {
    LayerSpec ls = spec.layers[t];
    if (t > 0) {
      const auto& prev = m.spec.layers[t - 1];
      if (ls.k != prev.l) throw std::invalid_argument("build_model: broken order chain at layer " + std::to_string(t));
      if (ls.d_in == 0) ls.d_in = prev.d_out;
      if (ls.d_in != prev.d_out) throw std::invalid_argument("build_model: width mismatch at layer " + std::to_string(t));
    }
    m.spec.layers[t] = ls;
    m.layers.push_back(EncoderLayer::make(ls, derive_seed(seed, {100 + t})));
  }
  int d = m.layers.back().d_out;
  m.final_ln = LayerNormParams::make(d);
  if (spec.out_dim > 0) {
    m.head_w = Matrix(d, spec.out_dim);
    m.head_b = Matrix(1, spec.out_dim);
    std::mt19937_64 rng(derive_seed(seed, {7}));
    double bound = std::sqrt(6.0 / (d + spec.out_dim));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& x : m.head_w.v) x = u(rng);
  }
  return m;
}

DenseTensor layer_norm_dense(const DenseTensor& a, const LayerNormParams& ln) {
  if (ln.gamma.cols != a.d) throw std::invalid_argument("layer_norm_dense: width mismatch");
  Matrix x(static_cast<int>(a.positions()), a.d);
  x.v = a.values;
  Tape t(false);
  DenseTensor out(a.n, a.k, a.d);
  out.values = ad::layer_norm(t, t.constant(std::move(x)), t.constant(ln.gamma), t.constant(ln.beta))->value.v;
  return out;
}

namespace {

DenseTensor mlp_dense(const LinearEquivariant& L, const DenseTensor& a) {
  return L.l == 0 ? forward_dense(L, a) : forward_lightweight(L, a);
}

}  // namespace

DenseTensor enc_forward(const EncoderLayer& e, const DenseTensor& a) {
  if (a.k != e.k || a.d != e.d_in) throw std::invalid_argument("enc_forward: order mismatch");
  DenseTensor h = e.bypass_norm ? a : layer_norm_dense(a, e.ln1);
  DenseTensor y = attn_dense(h, e.attn);
  DenseTensor z = e.bypass_norm ? y : layer_norm_dense(y, e.ln2);
  DenseTensor u = mlp_dense(e.mlp1, z);
  for (auto& v : u.values) v = ad::gelu_value(v);
  DenseTensor w = mlp_dense(e.mlp2, u);
  for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] += y.values[i];
  return w;
}

DenseTensor model_forward(const Model& m, const DenseTensor& a) {
  DenseTensor x = a;
  for (auto& l : m.layers) x = enc_forward(l, x);
  if (m.spec.final_norm) x = layer_norm_dense(x, m.final_ln);
  if (m.spec.out_dim == 0) return x;
  DenseTensor out(x.n, x.k, m.spec.out_dim);
  for (std::size_t p = 0; p < x.positions(); ++p) {
    double* o = out.at(p);
    for (int c = 0; c < m.spec.out_dim; ++c) o[c] = m.head_b.v[c];
    axpy_row_matmul(x.at(p), m.head_w, o);
  }
  return out;
}

LayerPlan plan_layer(const EncoderLayer& e, const EdgeSet& in) {
  if (in.k != e.k) throw std::invalid_argument("plan_layer: order mismatch");
  LayerPlan p;
  p.out_edges = output_edges(in, e.l);
  p.attn = build_attention_plan(in, p.out_edges, e.attn.classes, plan_options(e.attn));
  p.mlp = build_linear_plan(p.out_edges, p.out_edges, e.mlp1.classes);
  return p;
}

Var enc_forward(Tape& t, const EncoderLayer& e, const Var& x, const LayerPlan& plan, bool train) {
  if (x->value.cols != e.d_in) throw std::invalid_argument("enc_forward: channel mismatch");
  Var h = e.bypass_norm ? x : ad::layer_norm(t, x, t.param(e.ln1.gamma), t.param(e.ln1.beta));
  Var y = attention_forward(t, e.attn, h, plan.attn, train);
  Var z = e.bypass_norm ? y : ad::layer_norm(t, y, t.param(e.ln2.gamma), t.param(e.ln2.beta));
  Var u = ad::gelu(t, linear_forward(t, e.mlp1, z, plan.mlp));
  if (train) u = ad::dropout(t, u, e.dropout);
  return ad::add(t, y, linear_forward(t, e.mlp2, u, plan.mlp));
}

SparseTensor enc_forward(const EncoderLayer& e, const SparseTensor& s, bool train, std::uint64_t seed) {
  s.validate();
  LayerPlan plan = plan_layer(e, s.edges);
  Tape t(false, seed);
  Var y = enc_forward(t, e, t.constant(s.values), plan, train);
  return SparseTensor{plan.out_edges, std::move(y->value)};
}

ModelPlan plan_model(const Model& m, const EdgeSet& in) {
  ModelPlan p;
  const EdgeSet* cur = &in;
  for (auto& l : m.layers) {
    p.layers.push_back(plan_layer(l, *cur));
    cur = &p.layers.back().out_edges;
  }
  return p;
}

Var model_forward(Tape& t, const Model& m, const Var& x, const ModelPlan& plan, bool train) {
  Var h = x;
  for (std::size_t i = 0; i < m.layers.size(); ++i) h = enc_forward(t, m.layers[i], h, plan.layers[i], train);
  if (m.spec.final_norm) h = ad::layer_norm(t, h, t.param(m.final_ln.gamma), t.param(m.final_ln.beta));
  if (m.spec.out_dim > 0) h = ad::add_row(t, ad::matmul(t, h, t.param(m.head_w)), t.param(m.head_b));
  return h;
}

SparseTensor model_forward(const Model& m, const SparseTensor& s) {
  s.validate();
  ModelPlan plan = plan_model(m, s.edges);
  Tape t(false);
  Var y = model_forward(t, m, t.constant(s.values), plan, false);
  return SparseTensor{plan.out_edges(), std::move(y->value)};
}

void reduce_to_linear(EncoderLayer& e) {
  e.attn.force_unit_alpha = true;
  e.bypass_norm = true;
  for (auto& w : e.mlp1.weights) std::fill(w.v.begin(), w.v.end(), 0.0);
  std::fill(e.mlp1.bias.v.begin(), e.mlp1.bias.v.end(), 0.0);
  for (auto& w : e.mlp2.weights) std::fill(w.v.begin(), w.v.end(), 0.0);
}

LinearEquivariant equivalent_linear(const EncoderLayer& e) {
  bool full = e.attn.classes.size() == bell(e.k + e.l);
  auto L = LinearEquivariant::make(e.k, e.l, e.d_in, e.d_out, full ? ClassSetMode::Full : ClassSetMode::Explicit,
                                   e.attn.classes);
  auto w = merged_value_output(e.attn);
  for (std::size_t c = 0; c < e.attn.classes.size(); ++c) L.weights[L.class_index(e.attn.classes[c].part)] = w[c];
  L.bias = e.mlp2.bias;
  return L;
}

Model mpnn_emulation_weights(const MPNNOracle& o) {
  if (!o.M_affine || !o.U_affine) throw std::invalid_argument("mpnn_emulation_weights: M and U must be affine");
  const AffineMap& M = *o.M_affine;
  const AffineMap& U = *o.U_affine;
  int D0 = 2 * o.d_v + o.d_e, D1 = D0 + o.d_m, D2 = o.d_v + o.d_m + o.d;
  const std::vector<int> ident_off{0, 1, 0, 1}, diag{0, 0, 0, 0}, by_target{0, 1, 1, 1};
  LayerSpec l1;
  l1.d_in = D0;
  l1.d_out = D1;
  l1.d_H = D0;
  l1.d_F = 2 * o.d_m;
  l1.kernel = KernelKind::Constant;
  l1.d_K = 1;
  l1.bypass_norm = true;
  l1.classes = {ident_off, diag};
  LayerSpec l2 = l1;
  l2.d_in = D1;
  l2.d_out = D2;
  l2.d_H = D1;
  l2.d_F = 2 * o.d;
  l2.normalize = false;
  l2.classes = {by_target, diag};
  ModelSpec spec;
  spec.layers = {l1, l2};
  spec.final_norm = false;
  spec.out_dim = o.d;
  Model m = build_model(spec, 0);
  for (auto* p : m.parameters()) std::fill(p->v.begin(), p->v.end(), 0.0);

  auto& a1 = m.layers[0].attn;
  for (std::size_t c = 0; c < a1.classes.size(); ++c) {
    auto& b = a1.at(0, static_cast<int>(c));
    b.w_v = Matrix::identity(D0);
    for (int r = 0; r < D0; ++r) b.w_o(r, r) = 1.0;
  }
  auto& f1 = m.layers[0].mlp1;
  auto& g1 = m.layers[0].mlp2;
  int ci = f1.class_index(Partition(ident_off));
  const int offdiag[2] = {0, 1};
  int brow = bias_row(offdiag, 2);
  for (int a = 0; a < o.d_m; ++a) {
    for (int r = 0; r < D0; ++r) {
      f1.weights[ci](r, a) = M.W(a, r);
      f1.weights[ci](r, o.d_m + a) = -M.W(a, r);
    }
    f1.bias(brow, a) = M.b.v[a];
    f1.bias(brow, o.d_m + a) = -M.b.v[a];
    g1.weights[g1.class_index(Partition(ident_off))](a, D0 + a) = 1.0;
    g1.weights[g1.class_index(Partition(ident_off))](o.d_m + a, D0 + a) = -1.0;
  }

  auto& a2 = m.layers[1].attn;
  for (std::size_t c = 0; c < a2.classes.size(); ++c) {
    auto& b = a2.at(0, static_cast<int>(c));
    b.w_v = Matrix::identity(D1);
    if (a2.classes[c].part.rgs == diag)
      for (int r = 0; r < o.d_v; ++r) b.w_o(r, r) = 1.0;
    else
      for (int r = 0; r < o.d_m; ++r) b.w_o(D0 + r, o.d_v + r) = 1.0;
  }
  auto& f2 = m.layers[1].mlp1;
  auto& g2 = m.layers[1].mlp2;
  int cd = f2.class_index(Partition(diag));
  const int ondiag[2] = {0, 0};
  int drow = bias_row(ondiag, 2);
  int off = o.d_v + o.d_m;
  for (int a = 0; a < o.d; ++a) {
    for (int r = 0; r < off; ++r) {
      f2.weights[cd](r, a) = U.W(a, r);
      f2.weights[cd](r, o.d + a) = -U.W(a, r);
    }
    f2.bias(drow, a) = U.b.v[a];
    f2.bias(drow, o.d + a) = -U.b.v[a];
    g2.weights[g2.class_index(Partition(diag))](a, off + a) = 1.0;
    g2.weights[g2.class_index(Partition(diag))](o.d + a, off + a) = -1.0;
    m.head_w(off + a, a) = 1.0;
  }
  return m;
}

namespace {
constexpr char kModelMagic[4] = {'H', 'O', 'T', 'M'};
}

void save_checkpoint(std::ostream& os, const Model& m) {
  Model& mm = const_cast<Model&>(m);
  auto ps = mm.parameters();
  nlohmann::json shapes = nlohmann::json::array();
  for (auto* p : ps) shapes.push_back({p->rows, p->cols});
  nlohmann::json h{{"spec", m.spec}, {"seed", m.seed}, {"shapes", shapes}};
  binio::put_block(os, kModelMagic, 1, h.dump());
  for (auto* p : ps)
    for (double x : p->v) binio::put_f64(os, x);
}

Model load_checkpoint(std::istream& is) {
  auto h = nlohmann::json::parse(binio::get_block(is, kModelMagic, 1));
  Model m = build_model(h.at("spec").get<ModelSpec>(), h.at("seed").get<std::uint64_t>());
  auto ps = m.parameters();
  const auto& shapes = h.at("shapes");
  if (shapes.size() != ps.size()) throw std::runtime_error("load_checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (shapes[i][0] != ps[i]->rows || shapes[i][1] != ps[i]->cols)
      throw std::runtime_error("load_checkpoint: parameter shape mismatch at " + std::to_string(i));
    for (auto& x : ps[i]->v) x = binio::get_f64(is);
  }
  return m;
}

void save_checkpoint(const std::string& path, const Model& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  save_checkpoint(os, m);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  return load_checkpoint(is);
}

}  // namespace hot
