#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "latte/matrix.hpp"
#include "latte/sparse.hpp"

namespace latte {

using TypeId = std::int32_t;

struct NodeRef {
  TypeId type;
  std::int64_t index;
};

struct NodeType {
  std::string name;
  std::int64_t count = 0;
  /// Feature width, or nullopt for an unattributed type whose features are
  /// replaced by a learnable embedding table.
  std::optional<std::int64_t> feature_dim;
};

/// A first-order typed link set A^(src,dst).
struct Relation {
  std::string name;
  TypeId src = 0;
  TypeId dst = 0;
  SparseBiadj matrix;
  bool directed = true;
};

struct Splits {
  std::vector<std::int64_t> train;
  std::vector<std::int64_t> valid;
  std::vector<std::int64_t> test;
};

/// Label id used for nodes without a label.
inline constexpr int kNoLabel = -1;

/// Immutable attributed heterogeneous network. Node ids are dense per type.
class HetGraph {
 public:
  struct Parts {
    std::vector<NodeType> node_types;
    /// One entry per node type; empty Matrix for unattributed types.
    std::vector<Matrix> features;
    std::vector<Relation> relations;
    TypeId target_type = 0;
    int num_classes = 0;
    /// Labels of the target type, kNoLabel where unknown.
    std::vector<int> labels;
    Splits splits;
    /// Optional external string id per node, per type.
    std::vector<std::vector<std::string>> external_ids;
  };

  HetGraph() = default;
  /// Validates all invariants; throws ValidationError.
  explicit HetGraph(Parts parts);

  std::size_t num_types() const { return parts_.node_types.size(); }
  const NodeType& node_type(TypeId t) const { return parts_.node_types.at(t); }
  const std::vector<NodeType>& node_types() const { return parts_.node_types; }
  std::optional<TypeId> find_type(std::string_view name) const;
  std::int64_t count(TypeId t) const { return node_type(t).count; }
  bool attributed(TypeId t) const { return node_type(t).feature_dim.has_value(); }
  const Matrix& features(TypeId t) const { return parts_.features.at(t); }

  const std::vector<Relation>& relations() const { return parts_.relations; }
  const Relation& relation(std::size_t i) const { return parts_.relations.at(i); }
  std::optional<std::size_t> find_relation(std::string_view name) const;

  TypeId target_type() const { return parts_.target_type; }
  int num_classes() const { return parts_.num_classes; }
  const std::vector<int>& labels() const { return parts_.labels; }
  const Splits& splits() const { return parts_.splits; }
  const std::vector<std::string>& external_ids(TypeId t) const { return parts_.external_ids.at(t); }

  /// Entries of row i of relation rel, i.e. N_i with weights.
  std::vector<std::pair<std::int64_t, double>> neighbors(std::size_t rel, NodeRef i) const;

  const Parts& parts() const { return parts_; }

  /// Copy with a different relation list (re-validated).
  HetGraph with_relations(std::vector<Relation> relations) const;
  /// Copy with every feature row scaled to unit L2 norm.
  HetGraph with_normalized_features() const;

 private:
  void validate() const;
  Parts parts_;
};

/// Reads the tab-separated dataset directory layout (meta.json, nodes_*.tsv,
/// edges_*.tsv, labels_*.tsv, splits.json).
HetGraph load_dataset(const std::filesystem::path& dir);

/// Writes g in the layout load_dataset reads. Node ids are written as dense
/// integers unless external ids are present.
void write_dataset(const HetGraph& g, const std::filesystem::path& dir);

/// For every relation (m,n) without a transposed partner, appends (n,m) with
/// the transposed entries. Idempotent.
HetGraph add_reverse_relations(const HetGraph& g);

/// Name given to the injected reverse of a relation.
std::string reverse_relation_name(const HetGraph& g, const Relation& r);

/// 64-bit FNV-1a content hash of the graph (structure, features, labels,
/// splits).
std::uint64_t fingerprint(const HetGraph& g);

enum class PlantedRule { kFirstOrder, kSecondOrder };

/// Synthetic attributed network with a planted labelling rule. The target type
/// "P" links to auxiliary type "A" (relation PA) and optionally to a noise type
/// "C" (relation PC) whose links carry no label information.
struct SynthConfig {
  std::int64_t n_target = 300;
  std::int64_t n_aux = 100;
  std::int64_t n_noise = 0;
  std::int64_t feature_dim = 8;
  int num_classes = 3;
  PlantedRule rule = PlantedRule::kFirstOrder;
  /// Mean number of aux links per target node; per-node degree is uniform in
  /// [1, 2*mean-1].
  int aux_per_target = 3;
  int noise_per_target = 2;
  /// Std-dev of the log-normal popularity of aux nodes; 0 gives uniform
  /// attachment. The log popularity is exposed as a feature column.
  double degree_skew = 0.0;
  double feature_noise = 0.1;
  double train_frac = 0.5;
  double valid_frac = 0.2;
  /// When false, the noise type is written without features.
  bool noise_attributed = true;
};

/// Labels of the target type follow the plurality of the planted classes of
/// the 1-hop aux neighbors (first order) or of the distinct 2-hop target
/// neighbors via PA·AP (second order); ties go to the smallest class. Every
/// node's planted class is one-hot encoded in its first num_classes feature
/// columns. Deterministic in (cfg, seed).
HetGraph synth_generate(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace latte
