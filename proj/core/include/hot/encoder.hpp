#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hot/attention.hpp"
#include "hot/autodiff.hpp"
#include "hot/equivariant_linear.hpp"
#include "hot/mpnn.hpp"
#include "hot/sparse_plan.hpp"
#include "json.hpp"

namespace hot {

struct LayerSpec {
  int k = 2;
  int l = 2;
  int d_in = 0;
  int d_out = 0;
  int d_H = 0;
  int H = 1;
  int d_F = 0;  // 0 = d_out
  KernelKind kernel = KernelKind::Softmax;
  int d_K = 32;
  bool normalize = true;
  bool force_unit_alpha = false;
  bool bypass_norm = false;
  double dropout = 0.0;
  std::vector<std::vector<int>> classes;  // explicit attention classes (rgs); empty = all
};

struct ModelSpec {
  std::vector<LayerSpec> layers;
  bool final_norm = true;
  int out_dim = 0;  // 0 = no output projection
};

void to_json(nlohmann::json& j, const LayerSpec& s);
void from_json(const nlohmann::json& j, LayerSpec& s);
void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);

struct LayerNormParams {
  Matrix gamma;
  Matrix beta;
  static LayerNormParams make(int d);
};

struct EncoderLayer {
  int k = 0;
  int l = 0;
  int d_in = 0;
  int d_out = 0;
  int d_F = 0;
  AttentionParams attn;
  LinearEquivariant mlp1;  // l -> l, d_out -> d_F
  LinearEquivariant mlp2;  // l -> l, d_F -> d_out
  LayerNormParams ln1;     // over d_in
  LayerNormParams ln2;     // over d_out
  bool bypass_norm = false;
  double dropout = 0.0;

  static EncoderLayer make(const LayerSpec& spec, std::uint64_t seed);
  std::vector<Matrix*> parameters();
  std::size_t parameter_count() const;
};

struct Model {
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::vector<EncoderLayer> layers;
  LayerNormParams final_ln;
  Matrix head_w;  // d x out_dim
  Matrix head_b;  // 1 x out_dim

  std::vector<Matrix*> parameters();
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;
  int output_order() const { return layers.empty() ? 0 : layers.back().l; }
};

Model build_model(const ModelSpec& spec, std::uint64_t seed);

// Dense reference path.
DenseTensor layer_norm_dense(const DenseTensor& a, const LayerNormParams& ln);
DenseTensor enc_forward(const EncoderLayer& layer, const DenseTensor& a);
DenseTensor model_forward(const Model& m, const DenseTensor& a);

// Sparse (tape) path; kernel attention when the layer's kernel is not softmax.
struct LayerPlan {
  EdgeSet out_edges;
  AttentionPlan attn;
  LinearPlan mlp;
};
LayerPlan plan_layer(const EncoderLayer& layer, const EdgeSet& in);
Var enc_forward(Tape& t, const EncoderLayer& layer, const Var& x, const LayerPlan& plan, bool train);
SparseTensor enc_forward(const EncoderLayer& layer, const SparseTensor& s, bool train = false, std::uint64_t seed = 0);

struct ModelPlan {
  std::vector<LayerPlan> layers;
  const EdgeSet& out_edges() const { return layers.back().out_edges; }
};
ModelPlan plan_model(const Model& m, const EdgeSet& in);
Var model_forward(Tape& t, const Model& m, const Var& x, const ModelPlan& plan, bool train);
SparseTensor model_forward(const Model& m, const SparseTensor& s);

// Unit coefficients, identity norms, MLP reduced to its output bias field.
void reduce_to_linear(EncoderLayer& layer);
LinearEquivariant equivalent_linear(const EncoderLayer& layer);

// Two sparse kernel layers emulating one affine message-passing step on mpnn_pack inputs.
Model mpnn_emulation_weights(const MPNNOracle& oracle);

// "HOTM" v1: JSON {spec, seed, shapes} followed by parameters as little-endian f64.
void save_checkpoint(std::ostream& os, const Model& m);
Model load_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const Model& m);
Model load_checkpoint(const std::string& path);

}  // namespace hot
