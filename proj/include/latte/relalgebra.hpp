#pragma once

#include <compare>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "latte/hetgraph.hpp"
#include "latte/sparse.hpp"

namespace latte {

/// A (possibly composed) typed relation: the node-type path from source to
/// target plus the first-order relation name used for each hop.
struct MetaRelation {
  std::vector<TypeId> path;
  std::vector<std::string> edge_names;

  TypeId source() const { return path.front(); }
  TypeId target() const { return path.back(); }
  int order() const { return static_cast<int>(path.size()) - 1; }

  /// "PAP" when every hop is named after its endpoint types, otherwise the hop
  /// names joined with '.'.
  std::string name(const HetGraph& g) const;

  auto operator<=>(const MetaRelation&) const = default;
};

/// The set A^t of all meta relations of one order, in insertion order.
class RelationSet {
 public:
  struct Member {
    MetaRelation relation;
    SparseBiadj matrix;
  };

  explicit RelationSet(int order = 1) : order_(order) {}

  int order() const { return order_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  const Member& operator[](std::size_t i) const { return members_.at(i); }
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  /// Throws ValidationError on a path of the wrong length or a duplicate key.
  void insert(MetaRelation relation, SparseBiadj matrix);
  std::optional<std::size_t> find(const MetaRelation& r) const;
  /// Indices of the members whose source type is m, in insertion order.
  std::vector<std::size_t> indices_from(TypeId m) const;

 private:
  int order_;
  std::vector<Member> members_;
};

/// Order-1 set built from the graph's relations.
RelationSet base_relations(const HetGraph& g);

/// Degree-normalized composition A_mn · D^-1 · A_np where D_jj is the
/// weighted in-degree of j in A_mn plus its weighted out-degree in A_np.
/// Intermediate nodes with D_jj = 0 are skipped.
SparseBiadj compose(const SparseBiadj& a_mn, const SparseBiadj& a_np);

/// A^t = A^(t-1) x A over matching (target, source) pairs.
RelationSet lift(const RelationSet& prev, const RelationSet& base);

/// Members of rs whose source type is m.
RelationSet relations_from(const RelationSet& rs, TypeId m);

struct PruneEpsilon {
  double epsilon = 0.0;
};
struct PruneTopK {
  std::int64_t k = 1;
};
using PruneRule = std::variant<PruneEpsilon, PruneTopK>;

/// Drops entries below epsilon, or keeps the k largest per row (ties go to the
/// smaller column index).
SparseBiadj prune(const SparseBiadj& a, const PruneRule& rule);

/// A^1..A^T for g. The optional rule is applied to composed orders only.
std::vector<RelationSet> build_relation_sets(const HetGraph& g, int layers,
                                             const std::optional<PruneRule>& rule = std::nullopt);

}  // namespace latte
