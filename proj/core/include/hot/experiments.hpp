#pragma once

#include <any>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "hot/autodiff.hpp"
#include "hot/encoder.hpp"
#include "hot/tensor.hpp"

namespace hot {

struct Chain {
  int n = 0;
  int label = 0;
  int terminal = 0;
  Graph graph;       // path, both directions, d_e = 1
  Matrix node_x;     // n x 2 one-hot at the terminal
  SparseTensor tensor;  // order 2, channels [label0, label1, edge]
};

struct ChainDataset {
  std::vector<Chain> train;
  std::vector<Chain> test;
};

struct ChainDatasetOptions {
  int n_train = 40;
  int train_len = 20;
  int n_test = 20;
  int test_len = 200;
};

Chain make_chain(int n, int label, int terminal);
ChainDataset gen_chains(std::uint64_t seed, const ChainDatasetOptions& opt = {});
void save_dataset(std::ostream& os, const ChainDataset& ds);
ChainDataset load_dataset(std::istream& is);

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};
F1Scores f1_scores(const std::vector<int>& pred, const std::vector<int>& truth);
// Row-wise argmax, ties to the lower index.
std::vector<int> argmax_rows(const Matrix& logits);

// Per-node 2-class logit producer.
class NodeClassifier {
 public:
  virtual ~NodeClassifier() = default;
  virtual std::string name() const = 0;
  virtual std::any prepare(const Chain& c) const = 0;
  // aux receives per-example training state handed to after_batch in example order.
  virtual Var forward(Tape& t, const Chain& c, const std::any& plan, bool train, std::any* aux = nullptr) const = 0;
  virtual void after_batch(const std::vector<std::any>&) {}
  virtual std::vector<Matrix*> parameters() = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  std::size_t parameter_count();
};

class EncoderClassifier : public NodeClassifier {
 public:
  EncoderClassifier(std::string name, Model m) : name_(std::move(name)), model(std::move(m)) {}
  std::string name() const override { return name_; }
  std::any prepare(const Chain& c) const override;
  Var forward(Tape& t, const Chain& c, const std::any& plan, bool train, std::any* aux = nullptr) const override;
  std::vector<Matrix*> parameters() override { return model.parameters(); }
  std::vector<std::string> parameter_names() const override { return model.parameter_names(); }

 private:
  std::string name_;

 public:
  Model model;
};

// Sparse full-class equivariant MLP: L_{2->2}(w)-ReLU-L_{2->1}(w)-ReLU-Linear(2).
class MlpPiClassifier : public NodeClassifier {
 public:
  MlpPiClassifier(int d_in, int width, std::uint64_t seed);
  std::string name() const override { return "mlp-pi"; }
  std::any prepare(const Chain& c) const override;
  Var forward(Tape& t, const Chain& c, const std::any& plan, bool train, std::any* aux = nullptr) const override;
  std::vector<Matrix*> parameters() override;
  std::vector<std::string> parameter_names() const override;

  LinearEquivariant l1, l2;
  Matrix head_w, head_b;
};

// Message-passing baselines over node features [one-hot(2), 1].
enum class GnnKind { Gcn, Gin0 };

struct GnnParams {
  GnnKind kind = GnnKind::Gcn;
  int d_in = 3;
  int width = 16;
  int layers = 2;
  // per layer: GCN uses w[0], b[0]; GIN-0 uses w[0..1], b[0..1] and bn gamma/beta[0..1]
  std::vector<std::vector<Matrix>> w, b, gamma, beta;
  std::vector<std::vector<Matrix>> running_mean, running_var;  // not trained
  double momentum = 0.1;
  Matrix head_w, head_b;

  static GnnParams make(GnnKind kind, int d_in, int width, int layers, std::uint64_t seed);
  std::vector<Matrix*> parameters();
};

struct GnnPlan {
  PairList pairs;  // includes self-loops
  Matrix weight;   // pairs x 1, GCN normalization
};
GnnPlan gnn_plan(const Graph& g, GnnKind kind);
Matrix gnn_input(const Chain& c);
Var gcn_forward(Tape& t, const GnnParams& p, const Var& x, const GnnPlan& plan);
// train: per-graph batch statistics (appended to stats as mean, var pairs); otherwise running statistics.
Var gin0_forward(Tape& t, const GnnParams& p, const Var& x, const GnnPlan& plan, bool train = false,
                 std::vector<Matrix>* stats = nullptr);

class GnnClassifier : public NodeClassifier {
 public:
  GnnClassifier(GnnKind kind, int width, std::uint64_t seed) : p(GnnParams::make(kind, 3, width, 2, seed)) {}
  std::string name() const override { return p.kind == GnnKind::Gcn ? "gcn" : "gin0"; }
  std::any prepare(const Chain& c) const override;
  Var forward(Tape& t, const Chain& c, const std::any& plan, bool train, std::any* aux = nullptr) const override;
  void after_batch(const std::vector<std::any>& aux) override;
  std::vector<Matrix*> parameters() override { return p.parameters(); }
  std::vector<std::string> parameter_names() const override;

  GnnParams p;
};

// Drops attention classes with a block made only of input positions.
int ablate_global(Model& m);

ModelSpec chain_model_spec(KernelKind kernel, int width = 16);
std::vector<std::string> chain_model_ids();
std::unique_ptr<NodeClassifier> make_chain_model(const std::string& id, std::uint64_t seed);

enum class LossKind { Bce, CrossEntropy };
std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct TrainConfig {
  double lr = 1e-3;
  int batch = 16;
  int epochs = 100;
  LossKind loss = LossKind::Bce;
  std::uint64_t seed = 0;
  int threads = 1;
  int eval_every = 1;  // 0 = final epoch only
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double train_f1 = 0.0;
  bool evaluated = false;
  F1Scores test;
};

struct TrainResult {
  std::vector<EpochRecord> curve;
  F1Scores final_test;
};

Var chain_loss(Tape& t, const Var& logits, const std::vector<int>* labels, LossKind kind);
std::vector<int> predict(const NodeClassifier& m, const Chain& c, const std::any& plan);
F1Scores evaluate(const NodeClassifier& m, const std::vector<Chain>& chains, const std::vector<std::any>& plans,
                  int threads = 1);
TrainResult train_model(NodeClassifier& m, const ChainDataset& ds, const TrainConfig& cfg,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

// Uniform attachment: node t >= attach links to `attach` distinct earlier nodes.
Graph ba_random_graph(int n, int attach, std::uint64_t seed);

// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace hot
