#include "latte/model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "latte/error.hpp"

namespace latte {

namespace {

using json = nlohmann::json;
using ops::Trans;

// Softplus inverse of 1, so every temperature starts at exactly 1.
const double kTemperatureInit = std::log(std::exp(1.0) - 1.0);

Matrix glorot(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double fan_in,
              double fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const char* kind_name(ParamKind k) {
  switch (k) {
    case ParamKind::kWeight: return "weight";
    case ParamKind::kBias: return "bias";
    case ParamKind::kTemperature: return "temperature";
    case ParamKind::kEmbedding: return "embedding";
  }
  return "weight";
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "identity" || name == "linear") return Activation::kIdentity;
  throw ValidationError("unknown activation '" + name + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kIdentity: return "identity";
  }
  return "relu";
}

Matrix RelationWeights::dense() const {
  Matrix m(n_nodes, n_choices);
  if (!beta.defined()) return m;
  for (std::size_t e = 0; e < node.size(); ++e) {
    m(static_cast<std::size_t>(node[e]), static_cast<std::size_t>(choice[e])) = beta.value()[e];
  }
  return m;
}

Tensor attention_scores(Tape& tape, const Tensor& source_context, const Tensor& target_context,
                        const Tensor& kernel, std::span<const std::int64_t> src,
                        std::span<const std::int64_t> dst) {
  if (src.size() != dst.size()) throw ValidationError("attention_scores: src/dst length mismatch");
  if (kernel.rows() != 1 || kernel.cols() != source_context.cols() + target_context.cols()) {
    throw ValidationError("attention_scores: kernel must be 1 x 2F");
  }
  for (std::size_t e = 0; e < src.size(); ++e) {
    if (src[e] < 0 || static_cast<std::size_t>(src[e]) >= source_context.rows() || dst[e] < 0 ||
        static_cast<std::size_t>(dst[e]) >= target_context.rows()) {
      throw ValidationError("attention_scores: edge endpoint out of range");
    }
  }
  const Tensor pair[] = {ops::gather_rows(tape, source_context, src),
                         ops::gather_rows(tape, target_context, dst)};
  return ops::matmul(tape, ops::concat_cols(tape, pair), kernel, Trans::kNo, Trans::kYes);
}

Tensor attention_scores(Tape& tape, const Tensor& source_transform,
                        const Tensor& target_transform, const Tensor& kernel,
                        const Tensor& h_src, const Tensor& x_tgt, const EdgeList& edges) {
  auto src_ctx = ops::matmul(tape, h_src, source_transform, Trans::kNo, Trans::kYes);
  auto tgt_ctx = ops::matmul(tape, x_tgt, target_transform, Trans::kNo, Trans::kYes);
  return attention_scores(tape, src_ctx, tgt_ctx, kernel, edges.src, edges.dst);
}

Tensor attention_coefficients(Tape& tape, const Tensor& scores,
                              std::span<const std::int64_t> src, const Tensor& temperature) {
  if (scores.rows() == 0) {
    throw ValidationError("attention_coefficients: empty neighborhood");
  }
  return ops::segment_softmax(tape, scores, src, temperature);
}

RelationWeights relation_weights(Tape& tape, const Tensor& weight, const Tensor& bias,
                                 const Tensor& h_in,
                                 const std::vector<std::vector<char>>& has_links) {
  RelationWeights rw;
  rw.n_nodes = h_in.rows();
  rw.n_choices = weight.rows();
  if (has_links.size() + 1 != rw.n_choices) {
    throw ValidationError("relation_weights: choice count does not match relations");
  }
  if (rw.n_nodes == 0) return rw;
  auto logits = ops::add(tape, ops::matmul(tape, h_in, weight, Trans::kNo, Trans::kYes), bias);
  auto flat = ops::reshape(tape, logits, rw.n_nodes * rw.n_choices, 1);
  std::vector<std::int64_t> index;
  for (std::size_t i = 0; i < rw.n_nodes; ++i) {
    for (std::size_t c = 0; c < rw.n_choices; ++c) {
      if (c > 0 && !has_links[c - 1][i]) continue;
      rw.node.push_back(static_cast<std::int64_t>(i));
      rw.choice.push_back(static_cast<std::int64_t>(c));
      index.push_back(static_cast<std::int64_t>(i * rw.n_choices + c));
    }
  }
  auto valid = ops::gather_rows(tape, flat, index);
  rw.beta = ops::segment_softmax(tape, valid, rw.node, Tensor::constant(Matrix(1, 1, 1.0)));
  return rw;
}

Tensor relation_messages(Tape& tape, const Tensor& alpha, const Tensor& target_context,
                         const EdgeList& edges, std::size_t n_src) {
  auto values = ops::gather_rows(tape, target_context, edges.dst);
  return ops::segment_weighted_sum(tape, values, alpha, edges.src, n_src);
}

Tensor activate(Tape& tape, const Tensor& x, Activation activation) {
  switch (activation) {
    case Activation::kRelu: return ops::relu(tape, x);
    case Activation::kSigmoid: return ops::sigmoid(tape, x);
    case Activation::kIdentity: return x;
  }
  return x;
}

Tensor aggregate(Tape& tape, const Tensor& self_context, std::span<const Tensor> messages,
                 const RelationWeights& beta, Activation activation) {
  const auto n = self_context.rows();
  if (beta.n_nodes != n || messages.size() + 1 != beta.n_choices) {
    throw ValidationError("aggregate: beta does not match the messages");
  }
  if (n == 0) return self_context;
  std::vector<Tensor> stack{self_context};
  stack.insert(stack.end(), messages.begin(), messages.end());
  auto stacked = ops::concat_rows(tape, stack);
  std::vector<std::int64_t> rows(beta.node.size());
  for (std::size_t e = 0; e < rows.size(); ++e) {
    rows[e] = beta.choice[e] * static_cast<std::int64_t>(n) + beta.node[e];
  }
  auto chosen = ops::gather_rows(tape, stacked, rows);
  auto mixed = ops::segment_weighted_sum(tape, chosen, beta.beta, beta.node, n);
  return activate(tape, mixed, activation);
}

LatteModel::LatteModel(const HetGraph& schema, const std::vector<RelationSet>& sets,
                       ModelConfig cfg)
    : cfg_(cfg), num_classes_(schema.num_classes()) {
  if (cfg_.layers < 1) throw ValidationError("model needs at least one layer");
  if (cfg_.dim < 1) throw ValidationError("embedding dim must be positive");
  if (cfg_.dropout < 0.0 || cfg_.dropout >= 1.0) throw ValidationError("dropout must be in [0, 1)");
  if (static_cast<int>(sets.size()) != cfg_.layers) {
    throw ValidationError("need one relation set per layer");
  }
  if (cfg_.head_hidden <= 0) cfg_.head_hidden = cfg_.dim;
  const auto F = static_cast<std::size_t>(cfg_.dim);
  const auto n_types = schema.num_types();
  std::mt19937_64 rng(cfg_.seed);

  for (std::size_t m = 0; m < n_types; ++m) {
    const auto& nt = schema.node_types()[m];
    type_names_.push_back(nt.name);
    input_dims_.push_back(nt.feature_dim.value_or(cfg_.dim));
  }
  embedding_tables_.resize(n_types);
  for (std::size_t m = 0; m < n_types; ++m) {
    if (schema.attributed(static_cast<TypeId>(m))) continue;
    const auto count = static_cast<std::size_t>(schema.node_types()[m].count);
    embedding_tables_[m] = Tensor::parameter(glorot(rng, count, F, 1.0, static_cast<double>(F)));
    add_param("embedding." + type_names_[m], embedding_tables_[m], ParamKind::kEmbedding);
  }

  for (int t = 1; t <= cfg_.layers; ++t) {
    const auto& set = sets[static_cast<std::size_t>(t - 1)];
    if (set.order() != t) throw ValidationError("relation set order mismatch");
    std::vector<MetaRelation> paths;
    for (const auto& mem : set) paths.push_back(mem.relation);
    paths_.push_back(paths);

    LatteLayerParams p;
    p.order = t;
    const std::string prefix = "layer" + std::to_string(t) + ".";
    for (std::size_t m = 0; m < n_types; ++m) {
      const auto in = static_cast<std::size_t>(t == 1 ? input_dims_[m] : cfg_.dim);
      p.source_transform.push_back(
          Tensor::parameter(glorot(rng, F, in, static_cast<double>(in), static_cast<double>(F))));
      add_param(prefix + "U." + type_names_[m], p.source_transform.back(), ParamKind::kWeight);
      const auto raw = static_cast<std::size_t>(input_dims_[m]);
      p.target_transform.push_back(
          Tensor::parameter(glorot(rng, F, raw, static_cast<double>(raw), static_cast<double>(F))));
      add_param(prefix + "V." + type_names_[m], p.target_transform.back(), ParamKind::kWeight);
    }
    for (const auto& mem : set) {
      const auto name = mem.relation.name(schema);
      p.kernel.push_back(Tensor::parameter(glorot(rng, 1, 2 * F, 2.0 * F, 1.0)));
      add_param(prefix + "q." + name, p.kernel.back(), ParamKind::kWeight);
      p.temperature.push_back(Tensor::parameter(Matrix(1, 1, kTemperatureInit)));
      add_param(prefix + "tau." + name, p.temperature.back(), ParamKind::kTemperature);
    }
    for (std::size_t m = 0; m < n_types; ++m) {
      p.relations_from.push_back(set.indices_from(static_cast<TypeId>(m)));
      const auto choices = p.relations_from.back().size() + 1;
      const auto in = static_cast<std::size_t>(t == 1 ? input_dims_[m] : cfg_.dim);
      p.choice_weight.push_back(Tensor::parameter(
          glorot(rng, choices, in, static_cast<double>(in), static_cast<double>(choices))));
      add_param(prefix + "W." + type_names_[m], p.choice_weight.back(), ParamKind::kWeight);
      p.choice_bias.push_back(Tensor::parameter(Matrix(1, choices)));
      add_param(prefix + "b." + type_names_[m], p.choice_bias.back(), ParamKind::kBias);
    }
    layers_.push_back(std::move(p));
  }

  const auto width = embedding_width();
  const auto hidden = static_cast<std::size_t>(cfg_.head_hidden);
  const auto G = static_cast<std::size_t>(num_classes_);
  head_w1_ = Tensor::parameter(glorot(rng, hidden, width, static_cast<double>(width),
                                      static_cast<double>(hidden)));
  head_b1_ = Tensor::parameter(Matrix(1, hidden));
  head_w2_ = Tensor::parameter(glorot(rng, G, hidden, static_cast<double>(hidden),
                                      static_cast<double>(G)));
  head_b2_ = Tensor::parameter(Matrix(1, G));
  add_param("head.W1", head_w1_, ParamKind::kWeight);
  add_param("head.b1", head_b1_, ParamKind::kBias);
  add_param("head.W2", head_w2_, ParamKind::kWeight);
  add_param("head.b2", head_b2_, ParamKind::kBias);
}

void LatteModel::add_param(std::string name, Tensor t, ParamKind kind) {
  params_.push_back({std::move(name), std::move(t), kind});
}

const NamedParameter& LatteModel::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ValidationError("no parameter named " + name);
}

std::size_t LatteModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.value().size();
  return n;
}

std::vector<Matrix> LatteModel::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor.value());
  return out;
}

void LatteModel::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw ValidationError("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(params_[i].tensor.value())) {
      throw ValidationError("snapshot shape mismatch for " + params_[i].name);
    }
    params_[i].tensor.mutable_value() = values[i];
  }
}

void LatteModel::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Tensor LatteModel::input_features(Tape& tape, const HetGraph& g, TypeId t,
                                  const std::vector<std::int64_t>& ids) const {
  if (embedding_tables_[t].defined()) return ops::gather_rows(tape, embedding_tables_[t], ids);
  const auto& f = g.features(t);
  Matrix x(ids.size(), f.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto src = f.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  return Tensor::constant(std::move(x));
}

ForwardResult LatteModel::forward(Tape& tape, const HetGraph& g, const GraphView& view,
                                  const ForwardOptions& opt) const {
  const auto n_types = type_names_.size();
  if (view.nodes.size() != n_types || view.edges.size() != layers_.size()) {
    throw ValidationError("graph view does not match the model");
  }
  const auto F = static_cast<std::size_t>(cfg_.dim);
  ForwardResult res;
  for (std::size_t m = 0; m < n_types; ++m) {
    res.features.push_back(input_features(tape, g, static_cast<TypeId>(m), view.nodes[m]));
  }

  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& P = layers_[l];
    const auto& edges = view.edges[l];
    const auto& paths = paths_[l];
    if (edges.size() != paths.size()) throw ValidationError("graph view relation count mismatch");
    LayerState st;
    st.scores.resize(paths.size());
    st.alpha.resize(paths.size());
    st.temperature.resize(paths.size());
    for (std::size_t m = 0; m < n_types; ++m) {
      st.input.push_back(l == 0 ? res.features[m] : res.layers[l - 1].output[m]);
      st.source_context.push_back(
          ops::matmul(tape, st.input[m], P.source_transform[m], Trans::kNo, Trans::kYes));
      st.target_context.push_back(
          ops::matmul(tape, res.features[m], P.target_transform[m], Trans::kNo, Trans::kYes));
    }

    std::vector<Tensor> messages(paths.size());
    for (std::size_t r = 0; r < paths.size(); ++r) {
      const auto& e = edges[r];
      if (e.empty()) continue;
      const auto m = paths[r].source();
      const auto p = paths[r].target();
      st.temperature[r] = ops::softplus(tape, P.temperature[r]);
      st.scores[r] = attention_scores(tape, st.source_context[m], st.target_context[p],
                                      P.kernel[r], e.src, e.dst);
      st.alpha[r] = attention_coefficients(tape, st.scores[r], e.src, st.temperature[r]);
      messages[r] = relation_messages(tape, st.alpha[r], st.target_context[p], e, view.count(m));
    }

    for (std::size_t m = 0; m < n_types; ++m) {
      const auto n = view.count(static_cast<TypeId>(m));
      const auto& rels = P.relations_from[m];
      if (n == 0) {
        st.beta.emplace_back();
        st.beta.back().n_choices = rels.size() + 1;
        st.output.push_back(Tensor::constant(Matrix(0, F)));
        continue;
      }
      std::vector<std::vector<char>> has(rels.size(), std::vector<char>(n, 0));
      std::vector<Tensor> msgs;
      for (std::size_t c = 0; c < rels.size(); ++c) {
        for (auto s : edges[rels[c]].src) has[c][static_cast<std::size_t>(s)] = 1;
        msgs.push_back(messages[rels[c]].defined() ? messages[rels[c]]
                                                   : Tensor::constant(Matrix(n, F)));
      }
      st.beta.push_back(relation_weights(tape, P.choice_weight[m], P.choice_bias[m], st.input[m], has));
      st.output.push_back(aggregate(tape, st.source_context[m], msgs, st.beta.back(), cfg_.activation));
    }
    res.layers.push_back(std::move(st));
  }

  for (std::size_t m = 0; m < n_types; ++m) {
    std::vector<Tensor> parts;
    for (const auto& st : res.layers) parts.push_back(st.output[m]);
    auto h = parts.size() == 1 ? parts.front() : ops::concat_cols(tape, parts);
    if (opt.training && cfg_.dropout > 0.0) {
      h = ops::dropout(tape, h, cfg_.dropout, mix(opt.dropout_seed, m));
    }
    res.embedding.push_back(h);
  }
  return res;
}

Tensor LatteModel::classify(Tape& tape, const Tensor& embedding) const {
  const auto n = embedding.rows();
  const auto G = static_cast<std::size_t>(num_classes_);
  if (n == 0) return Tensor::constant(Matrix(0, G));
  auto hidden = ops::relu(
      tape, ops::add(tape, ops::matmul(tape, embedding, head_w1_, Trans::kNo, Trans::kYes), head_b1_));
  auto logits =
      ops::add(tape, ops::matmul(tape, hidden, head_w2_, Trans::kNo, Trans::kYes), head_b2_);
  std::vector<std::int64_t> seg(n * G);
  for (std::size_t i = 0; i < seg.size(); ++i) seg[i] = static_cast<std::int64_t>(i / G);
  auto probs = ops::segment_softmax(tape, ops::reshape(tape, logits, n * G, 1), seg,
                                    Tensor::constant(Matrix(1, 1, 1.0)));
  return ops::reshape(tape, probs, n, G);
}

void LatteModel::check_schema(const std::vector<RelationSet>& sets) const {
  if (sets.size() != paths_.size()) throw ValidationError("relation set count differs from model");
  for (std::size_t l = 0; l < sets.size(); ++l) {
    if (sets[l].size() != paths_[l].size()) {
      throw ValidationError("order-" + std::to_string(l + 1) + " relation set differs from model");
    }
    for (std::size_t r = 0; r < sets[l].size(); ++r) {
      if (!(sets[l][r].relation == paths_[l][r])) {
        throw ValidationError("order-" + std::to_string(l + 1) + " relation set differs from model");
      }
    }
  }
}

void LatteModel::save(const std::filesystem::path& file,
                      const std::map<std::string, std::string>& metadata) const {
  json j;
  j["format"] = "latte-checkpoint";
  j["version"] = 1;
  j["config"] = {{"layers", cfg_.layers},
                 {"dim", cfg_.dim},
                 {"head_hidden", cfg_.head_hidden},
                 {"dropout", cfg_.dropout},
                 {"activation", activation_name(cfg_.activation)},
                 {"seed", cfg_.seed}};
  j["num_classes"] = num_classes_;
  j["node_types"] = json::array();
  for (std::size_t m = 0; m < type_names_.size(); ++m) {
    j["node_types"].push_back({{"name", type_names_[m]}, {"input_dim", input_dims_[m]}});
  }
  j["relation_sets"] = json::array();
  for (const auto& order : paths_) {
    json arr = json::array();
    for (const auto& r : order) {
      json path = json::array();
      for (auto t : r.path) path.push_back(type_names_[t]);
      arr.push_back({{"path", path}, {"edges", r.edge_names}});
    }
    j["relation_sets"].push_back(arr);
  }
  j["metadata"] = metadata;
  j["parameters"] = json::array();
  for (const auto& p : params_) {
    const auto& v = p.tensor.value();
    j["parameters"].push_back({{"name", p.name},
                               {"kind", kind_name(p.kind)},
                               {"shape", {v.rows(), v.cols()}},
                               {"data", v.data()}});
  }
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write checkpoint " + file.string());
  out << j.dump() << "\n";
}

LatteModel LatteModel::load(const std::filesystem::path& file, const HetGraph& schema,
                            const std::vector<RelationSet>& sets,
                            std::map<std::string, std::string>* metadata) {
  std::ifstream in(file);
  if (!in) throw ValidationError("missing file: " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint: " + std::string(e.what()));
  }
  if (j.value("format", "") != "latte-checkpoint") throw ValidationError("not a latte checkpoint");
  try {
    ModelConfig cfg;
    const auto& c = j.at("config");
    cfg.layers = c.at("layers").get<int>();
    cfg.dim = c.at("dim").get<int>();
    cfg.head_hidden = c.at("head_hidden").get<int>();
    cfg.dropout = c.at("dropout").get<double>();
    cfg.activation = parse_activation(c.at("activation").get<std::string>());
    cfg.seed = c.at("seed").get<std::uint64_t>();
    if (j.at("num_classes").get<int>() != schema.num_classes()) {
      throw ValidationError("checkpoint class count differs from dataset");
    }
    const auto& types = j.at("node_types");
    if (types.size() != schema.num_types()) throw ValidationError("checkpoint node types differ");
    for (std::size_t m = 0; m < types.size(); ++m) {
      if (types[m].at("name").get<std::string>() != schema.node_types()[m].name) {
        throw ValidationError("checkpoint node types differ from dataset");
      }
    }
    LatteModel model(schema, sets, cfg);
    const auto& stored_sets = j.at("relation_sets");
    if (stored_sets.size() != model.paths_.size()) throw ValidationError("checkpoint layer count mismatch");
    for (std::size_t l = 0; l < stored_sets.size(); ++l) {
      if (stored_sets[l].size() != model.paths_[l].size()) {
        throw ValidationError("checkpoint relation set differs from dataset at order " +
                              std::to_string(l + 1));
      }
      for (std::size_t r = 0; r < stored_sets[l].size(); ++r) {
        auto edges = stored_sets[l][r].at("edges").get<std::vector<std::string>>();
        if (edges != model.paths_[l][r].edge_names) {
          throw ValidationError("checkpoint relation set differs from dataset at order " +
                                std::to_string(l + 1));
        }
      }
    }
    std::map<std::string, const json*> by_name;
    for (const auto& p : j.at("parameters")) by_name[p.at("name").get<std::string>()] = &p;
    for (auto& p : model.params_) {
      auto it = by_name.find(p.name);
      if (it == by_name.end()) throw ValidationError("checkpoint lacks parameter " + p.name);
      auto shape = it->second->at("shape").get<std::vector<std::size_t>>();
      auto data = it->second->at("data").get<std::vector<double>>();
      auto& v = p.tensor.mutable_value();
      if (shape.size() != 2 || shape[0] != v.rows() || shape[1] != v.cols() || data.size() != v.size()) {
        throw ValidationError("checkpoint shape mismatch for " + p.name);
      }
      v.data() = std::move(data);
    }
    if (metadata && j.contains("metadata")) {
      *metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint: " + std::string(e.what()));
  }
}

std::vector<Matrix> embed(const LatteModel& model, const HetGraph& g, const GraphView& view) {
  Tape tape;
  auto res = model.forward(tape, g, view, {});
  std::vector<Matrix> out;
  for (const auto& h : res.embedding) out.push_back(h.value());
  return out;
}

}  // namespace latte
