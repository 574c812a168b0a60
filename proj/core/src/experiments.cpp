#include "hot/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>

#include "hot/binio.hpp"
#include "hot/rng.hpp"

namespace hot {

Chain make_chain(int n, int label, int terminal) {
  if (n < 1 || label < 0 || label > 1 || terminal < 0 || terminal >= n)
    throw std::invalid_argument("make_chain: bad arguments");
  Chain c;
  c.n = n;
  c.label = label;
  c.terminal = terminal;
  std::vector<std::array<int, 2>> und;
  for (int i = 0; i + 1 < n; ++i) und.push_back({i, i + 1});
  c.graph = make_undirected(n, und, 1);
  std::fill(c.graph.edge_features.v.begin(), c.graph.edge_features.v.end(), 1.0);
  c.node_x = Matrix(n, 2);
  c.node_x(terminal, label) = 1.0;
  c.tensor = encode_graph(c.node_x, c.graph);
  for (int r = 0; r < c.tensor.m(); ++r) {
    const int* t = c.tensor.edges.tuple(r);
    if (t[0] == t[1]) c.tensor.values(r, 2) = 1.0;
  }
  return c;
}

ChainDataset gen_chains(std::uint64_t seed, const ChainDatasetOptions& opt) {
  std::mt19937_64 rng(derive_seed(seed, {0xc4a1}));
  std::bernoulli_distribution coin(0.5);
  ChainDataset ds;
  for (int i = 0; i < opt.n_train; ++i) ds.train.push_back(make_chain(opt.train_len, coin(rng), 0));
  for (int i = 0; i < opt.n_test; ++i) ds.test.push_back(make_chain(opt.test_len, coin(rng), 0));
  return ds;
}

namespace {
constexpr char kDataMagic[4] = {'H', 'O', 'T', 'D'};

nlohmann::json chain_meta(const std::vector<Chain>& cs) {
  auto a = nlohmann::json::array();
  for (auto& c : cs) a.push_back({{"n", c.n}, {"label", c.label}, {"terminal", c.terminal}});
  return a;
}
}  // namespace

void save_dataset(std::ostream& os, const ChainDataset& ds) {
  nlohmann::json h{{"train", chain_meta(ds.train)}, {"test", chain_meta(ds.test)}};
  binio::put_block(os, kDataMagic, 1, h.dump());
  for (auto* part : {&ds.train, &ds.test})
    for (auto& c : *part) save_snapshot(os, c.tensor);
}

ChainDataset load_dataset(std::istream& is) {
  auto h = nlohmann::json::parse(binio::get_block(is, kDataMagic, 1));
  ChainDataset ds;
  for (auto [key, part] : {std::pair{"train", &ds.train}, std::pair{"test", &ds.test}})
    for (auto& meta : h.at(key)) {
      Chain c = make_chain(meta.at("n"), meta.at("label"), meta.at("terminal"));
      SparseTensor s = load_sparse_snapshot(is);
      if (!(s.edges == c.tensor.edges)) throw std::runtime_error("load_dataset: edge set does not match a chain");
      c.tensor = std::move(s);
      part->push_back(std::move(c));
    }
  return ds;
}

F1Scores f1_scores(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.empty() || pred.size() != truth.size()) throw std::invalid_argument("f1_scores: empty or mismatched input");
  std::map<int, std::array<long, 3>> cnt;  // tp, fp, fn
  long tp = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == truth[i]) {
      ++cnt[pred[i]][0];
      ++tp;
    } else {
      ++cnt[pred[i]][1];
      ++cnt[truth[i]][2];
    }
  }
  F1Scores s;
  // single-label: micro precision = recall = accuracy
  s.micro = static_cast<double>(tp) / static_cast<double>(pred.size());
  double sum = 0.0;
  for (auto& [c, v] : cnt) {
    double denom = 2.0 * v[0] + v[1] + v[2];
    sum += denom > 0 ? 2.0 * v[0] / denom : 0.0;
  }
  s.macro = sum / static_cast<double>(cnt.size());
  return s;
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows);
  for (int r = 0; r < logits.rows; ++r) {
    const double* p = logits.row(r);
    out[r] = static_cast<int>(std::max_element(p, p + logits.cols) - p);
  }
  return out;
}

std::size_t NodeClassifier::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->size();
  return n;
}

std::any EncoderClassifier::prepare(const Chain& c) const {
  auto plan = std::make_shared<ModelPlan>(plan_model(model, c.tensor.edges));
  if (plan->out_edges().k != 1 || plan->out_edges().size() != c.n)
    throw std::logic_error("EncoderClassifier: model must end in a node-level layer");
  return std::shared_ptr<const ModelPlan>(std::move(plan));
}

Var EncoderClassifier::forward(Tape& t, const Chain& c, const std::any& plan, bool train, std::any*) const {
  auto& p = *std::any_cast<const std::shared_ptr<const ModelPlan>&>(plan);
  return model_forward(t, model, t.constant(c.tensor.values), p, train);
}

int ablate_global(Model& m) {
  int removed = 0;
  for (auto& layer : m.layers) {
    if (layer.l == 0) continue;
    std::size_t before = layer.attn.classes.size();
    layer.attn.filter_classes([](const EquivalenceClass& mu) { return mu.is_lightweight(); });
    removed += static_cast<int>(before - layer.attn.classes.size());
  }
  return removed;
}

ModelSpec chain_model_spec(KernelKind kernel, int width) {
  LayerSpec a;
  a.k = 2;
  a.l = 2;
  a.d_in = 3;
  a.d_out = width;
  a.d_H = width;
  a.H = 1;
  a.kernel = kernel;
  a.d_K = 32;
  LayerSpec b = a;
  b.l = 1;
  b.d_in = width;
  ModelSpec s;
  s.layers = {a, b};
  s.final_norm = true;
  s.out_dim = 2;
  return s;
}

std::vector<std::string> chain_model_ids() { return {"ours-s", "ours-s-phi", "ours-ablated", "mlp-pi", "gcn", "gin0"}; }

std::unique_ptr<NodeClassifier> make_chain_model(const std::string& id, std::uint64_t seed) {
  if (id == "ours-s") return std::make_unique<EncoderClassifier>(id, build_model(chain_model_spec(KernelKind::Softmax), seed));
  if (id == "ours-s-phi")
    return std::make_unique<EncoderClassifier>(id, build_model(chain_model_spec(KernelKind::Performer), seed));
  if (id == "ours-ablated") {
    Model m = build_model(chain_model_spec(KernelKind::Softmax), seed);
    ablate_global(m);
    return std::make_unique<EncoderClassifier>(id, std::move(m));
  }
  if (id == "mlp-pi") return std::make_unique<MlpPiClassifier>(3, 16, seed);
  if (id == "gcn") return std::make_unique<GnnClassifier>(GnnKind::Gcn, 16, seed);
  if (id == "gin0") return std::make_unique<GnnClassifier>(GnnKind::Gin0, 16, seed);
  throw std::invalid_argument("unknown chain model '" + id + "'");
}

std::string to_string(LossKind k) { return k == LossKind::Bce ? "bce" : "ce"; }

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "bce") return LossKind::Bce;
  if (s == "ce") return LossKind::CrossEntropy;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

Var chain_loss(Tape& t, const Var& logits, const std::vector<int>* labels, LossKind kind) {
  if (kind == LossKind::CrossEntropy) return ad::softmax_cross_entropy(t, logits, labels);
  // sigmoid(z1 - z0) is the softmax probability of class 1
  Var z = ad::sub(t, ad::slice_cols(t, logits, 1, 2), ad::slice_cols(t, logits, 0, 1));
  return ad::bce_with_logits(t, z, labels);
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errs(threads);
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

std::vector<int> predict(const NodeClassifier& m, const Chain& c, const std::any& plan) {
  Tape t(false);
  return argmax_rows(m.forward(t, c, plan, false)->value);
}

F1Scores evaluate(const NodeClassifier& m, const std::vector<Chain>& chains, const std::vector<std::any>& plans,
                  int threads) {
  std::vector<std::vector<int>> preds(chains.size());
  parallel_for(static_cast<int>(chains.size()), threads, [&](int i) { preds[i] = predict(m, chains[i], plans[i]); });
  std::vector<int> all, truth;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    all.insert(all.end(), preds[i].begin(), preds[i].end());
    truth.insert(truth.end(), preds[i].size(), chains[i].label);
  }
  return f1_scores(all, truth);
}

TrainResult train_model(NodeClassifier& m, const ChainDataset& ds, const TrainConfig& cfg,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
  if (cfg.lr <= 0 || cfg.batch <= 0 || cfg.epochs < 0) throw std::invalid_argument("train_model: bad config");
  if (ds.train.empty()) throw std::invalid_argument("train_model: empty training set");
  std::vector<std::any> train_plans, test_plans;
  for (auto& c : ds.train) train_plans.push_back(m.prepare(c));
  for (auto& c : ds.test) test_plans.push_back(m.prepare(c));
  std::vector<std::vector<int>> labels;
  for (auto& c : ds.train) labels.emplace_back(c.n, c.label);

  ParamStore store;
  store.bind(m.parameters(), m.parameter_names());
  std::mt19937_64 rng(derive_seed(cfg.seed, {0x7a1}));
  std::vector<int> order(ds.train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult res;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::vector<int> train_pred, train_truth;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
      int B = static_cast<int>(std::min<std::size_t>(cfg.batch, order.size() - b0));
      std::vector<std::vector<Matrix>> grads(B);
      std::vector<double> losses(B);
      std::vector<std::vector<int>> preds(B);
      std::vector<std::any> aux(B);
      parallel_for(B, cfg.threads, [&](int i) {
        int ex = order[b0 + i];
        Tape t(true, derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(ex)}));
        Var logits = m.forward(t, ds.train[ex], train_plans[ex], true, &aux[i]);
        Var loss = chain_loss(t, logits, &labels[ex], cfg.loss);
        t.backward(loss);
        losses[i] = loss->value.v[0];
        preds[i] = argmax_rows(logits->value);
        grads[i] = store.collect(t);
      });
      store.zero_grad();
      for (int i = 0; i < B; ++i) {
        if (!std::isfinite(losses[i]))
          throw std::runtime_error("train_model: non-finite loss at epoch " + std::to_string(epoch) + " on chain " +
                                   std::to_string(order[b0 + i]));
        store.accumulate(grads[i], 1.0 / B);
        loss_sum += losses[i];
        train_pred.insert(train_pred.end(), preds[i].begin(), preds[i].end());
        train_truth.insert(train_truth.end(), preds[i].size(), ds.train[order[b0 + i]].label);
      }
      adam_step(store, cfg.lr);
      m.after_batch(aux);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.train_f1 = f1_scores(train_pred, train_truth).micro;
    bool last = epoch == cfg.epochs;
    if (!ds.test.empty() && (last || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0))) {
      rec.evaluated = true;
      rec.test = evaluate(m, ds.test, test_plans, cfg.threads);
    }
    if (last) res.final_test = rec.test;
    res.curve.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (cfg.epochs == 0 && !ds.test.empty()) res.final_test = evaluate(m, ds.test, test_plans, cfg.threads);
  return res;
}

Graph ba_random_graph(int n, int attach, std::uint64_t seed) {
  if (n <= 0 || attach <= 0) throw std::invalid_argument("ba_random_graph: n and attach must be positive");
  std::mt19937_64 rng(derive_seed(seed, {0xba}));
  std::vector<std::array<int, 2>> und;
  std::vector<int> pool;
  for (int t = attach; t < n; ++t) {
    // partial Fisher-Yates over [0, t)
    pool.resize(t);
    std::iota(pool.begin(), pool.end(), 0);
    for (int s = 0; s < attach; ++s) {
      std::uniform_int_distribution<int> u(s, t - 1);
      std::swap(pool[s], pool[u(rng)]);
      und.push_back({pool[s], t});
    }
  }
  Graph g = make_undirected(n, und, 1);
  std::fill(g.edge_features.v.begin(), g.edge_features.v.end(), 1.0);
  return g;
}

}  // namespace hot
