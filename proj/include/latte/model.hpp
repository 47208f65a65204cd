#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "latte/hetgraph.hpp"
#include "latte/relalgebra.hpp"
#include "latte/tensor.hpp"
#include "latte/view.hpp"

namespace latte {

enum class Activation { kRelu, kSigmoid, kIdentity };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

struct ModelConfig {
  int layers = 2;
  /// Per-layer embedding width F.
  int dim = 128;
  /// Hidden width of the classifier MLP; 0 means dim.
  int head_hidden = 0;
  /// Dropout on the concatenated embedding output.
  double dropout = 0.3;
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;
};

enum class ParamKind { kWeight, kBias, kTemperature, kEmbedding };

struct NamedParameter {
  std::string name;
  Tensor tensor;
  ParamKind kind;

  /// Weight decay applies to weights and embedding tables only.
  bool decays() const { return kind == ParamKind::kWeight || kind == ParamKind::kEmbedding; }
};

/// Learnable symbols of one layer t. Indexed by node type or by member of A^t.
struct LatteLayerParams {
  int order = 1;
  /// U_m: F x (D_m at t=1, F after); applied to x_i or h^{t-1}_i.
  std::vector<Tensor> source_transform;
  /// V_n: F x D_n; always applied to raw target features.
  std::vector<Tensor> target_transform;
  /// q_r: 1 x 2F attention kernel per relation.
  std::vector<Tensor> kernel;
  /// Unconstrained per-relation scalar; temperature = softplus(value).
  std::vector<Tensor> temperature;
  /// W_m: (k_m + 1) x input width; row 0 scores the "self" choice.
  std::vector<Tensor> choice_weight;
  /// b_m: 1 x (k_m + 1).
  std::vector<Tensor> choice_bias;
  /// Per type: indices of A^t members with that source type (choice c+1).
  std::vector<std::vector<std::size_t>> relations_from;
};

/// Per-node relation weights over the admissible choices, stored sparsely in
/// node-major order. Choice 0 is "self"; choice c >= 1 is relations_from[c-1].
struct RelationWeights {
  Tensor beta;
  std::vector<std::int64_t> node;
  std::vector<std::int64_t> choice;
  std::size_t n_nodes = 0;
  std::size_t n_choices = 1;

  /// n_nodes x n_choices, zero for excluded choices.
  Matrix dense() const;
};

/// e_ij = q^T [src_ctx_i || tgt_ctx_j] for each listed link; E x 1.
Tensor attention_scores(Tape& tape, const Tensor& source_context, const Tensor& target_context,
                        const Tensor& kernel, std::span<const std::int64_t> src,
                        std::span<const std::int64_t> dst);

/// Same score from raw inputs: source_context = h_src·U^T, target_context =
/// x_tgt·V^T.
Tensor attention_scores(Tape& tape, const Tensor& source_transform,
                        const Tensor& target_transform, const Tensor& kernel,
                        const Tensor& h_src, const Tensor& x_tgt, const EdgeList& edges);

/// Softmax of temperature·e over each source node's links. src must be
/// sorted; every scored node has at least one link by construction.
Tensor attention_coefficients(Tape& tape, const Tensor& scores,
                              std::span<const std::int64_t> src, const Tensor& temperature);

/// beta = softmax(W·h + b) per node, restricted to "self" plus the relations in
/// which the node has at least one link (has_links[c][i]), renormalized.
RelationWeights relation_weights(Tape& tape, const Tensor& weight, const Tensor& bias,
                                 const Tensor& h_in,
                                 const std::vector<std::vector<char>>& has_links);

/// sum_j alpha_ij · target_context_j per source node; n_src x F.
Tensor relation_messages(Tape& tape, const Tensor& alpha, const Tensor& target_context,
                         const EdgeList& edges, std::size_t n_src);

/// h_i = act(beta_0·self_i + sum_r beta_r·message_r,i).
Tensor aggregate(Tape& tape, const Tensor& self_context, std::span<const Tensor> messages,
                 const RelationWeights& beta, Activation activation);

Tensor activate(Tape& tape, const Tensor& x, Activation activation);

/// Tensors produced by one layer of a forward pass.
struct LayerState {
  std::vector<Tensor> input;           // per type: x (t=1) or h^{t-1}
  std::vector<Tensor> source_context;  // per type: input·U^T
  std::vector<Tensor> target_context;  // per type: x·V^T
  std::vector<Tensor> scores;          // per relation of A^t; undefined when no links
  std::vector<Tensor> alpha;
  std::vector<Tensor> temperature;     // per relation, 1x1
  std::vector<RelationWeights> beta;   // per type
  std::vector<Tensor> output;          // per type: h^t
};

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

struct ForwardResult {
  std::vector<Tensor> features;  // per type, local rows
  std::vector<LayerState> layers;
  /// Per type: h^1 || ... || h^T, after dropout in training mode.
  std::vector<Tensor> embedding;
};

/// Layer-stacked attention model over a fixed relation-set schema.
/// Move-only: parameters are shared tensor handles.
class LatteModel {
 public:
  LatteModel(const HetGraph& schema, const std::vector<RelationSet>& sets, ModelConfig cfg);
  LatteModel(LatteModel&&) = default;
  LatteModel& operator=(LatteModel&&) = default;
  LatteModel(const LatteModel&) = delete;
  LatteModel& operator=(const LatteModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  int layers() const { return cfg_.layers; }
  int dim() const { return cfg_.dim; }
  std::size_t embedding_width() const { return static_cast<std::size_t>(cfg_.layers * cfg_.dim); }
  int num_classes() const { return num_classes_; }

  LatteLayerParams& layer(int t) { return layers_.at(static_cast<std::size_t>(t - 1)); }
  const LatteLayerParams& layer(int t) const { return layers_.at(static_cast<std::size_t>(t - 1)); }
  const std::vector<std::vector<MetaRelation>>& relation_paths() const { return paths_; }
  const std::vector<std::string>& type_names() const { return type_names_; }

  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  const NamedParameter& parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);
  void zero_grad();

  /// Runs all T layers over the view. In training mode dropout is applied to
  /// the concatenated embedding.
  ForwardResult forward(Tape& tape, const HetGraph& g, const GraphView& view,
                        const ForwardOptions& opt) const;

  /// Class probabilities (rows sum to 1) from embedding rows.
  Tensor classify(Tape& tape, const Tensor& embedding) const;

  /// Throws ValidationError unless sets have the same members as the model.
  void check_schema(const std::vector<RelationSet>& sets) const;

  void save(const std::filesystem::path& file,
            const std::map<std::string, std::string>& metadata = {}) const;
  /// Rebuilds a model from a checkpoint; the graph's relation sets must match
  /// the stored paths.
  static LatteModel load(const std::filesystem::path& file, const HetGraph& schema,
                         const std::vector<RelationSet>& sets,
                         std::map<std::string, std::string>* metadata = nullptr);

 private:
  void add_param(std::string name, Tensor t, ParamKind kind);
  Tensor input_features(Tape& tape, const HetGraph& g, TypeId t,
                        const std::vector<std::int64_t>& ids) const;

  ModelConfig cfg_;
  int num_classes_ = 0;
  std::vector<std::string> type_names_;
  std::vector<std::int64_t> input_dims_;
  std::vector<std::vector<MetaRelation>> paths_;
  std::vector<LatteLayerParams> layers_;
  std::vector<Tensor> embedding_tables_;  // undefined for attributed types
  Tensor head_w1_, head_b1_, head_w2_, head_b2_;
  std::vector<NamedParameter> params_;
};

/// Inference-mode embedding of every node in the view, per type
/// (count x T·F).
std::vector<Matrix> embed(const LatteModel& model, const HetGraph& g, const GraphView& view);

}  // namespace latte
