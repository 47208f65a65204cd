#pragma once

#include <cstdint>
#include <vector>

#include "latte/hetgraph.hpp"
#include "latte/relalgebra.hpp"

namespace latte {

/// Links of one meta relation restricted to a view, in local ids, sorted by
/// source. weight carries the biadjacency entry a_ik.
struct EdgeList {
  std::vector<std::int64_t> src;
  std::vector<std::int64_t> dst;
  std::vector<double> weight;

  std::size_t size() const { return src.size(); }
  bool empty() const { return src.empty(); }
};

/// The nodes and per-order links a forward pass runs over: either the whole
/// graph or a sampled subnetwork.
struct GraphView {
  /// Per type: local index -> global node id (ascending).
  std::vector<std::vector<std::int64_t>> nodes;
  /// edges[t-1][r]: links of member r of A^t among the view's nodes.
  std::vector<std::vector<EdgeList>> edges;

  std::size_t count(TypeId t) const { return nodes[t].size(); }
};

/// View over every node and link of g.
GraphView full_view(const HetGraph& g, const std::vector<RelationSet>& sets);

}  // namespace latte
