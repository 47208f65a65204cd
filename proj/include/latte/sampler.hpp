#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "latte/view.hpp"

namespace latte {

/// One neighbor draw: at hop `hop`, node `node` of type `type` kept `picked`
/// (global ids) out of its row in base relation `relation`.
struct SampledHop {
  int hop = 0;
  TypeId type = 0;
  std::int64_t node = 0;
  std::size_t relation = 0;
  std::vector<std::int64_t> picked;
};

/// A sampled mini-batch subnetwork. Edges of every order are the links of the
/// precomposed relation sets among the retained nodes.
struct Subnetwork : GraphView {
  /// Local indices (within the target type) of the seed nodes, in input order.
  std::vector<std::int64_t> seeds;
  std::vector<SampledHop> hops;
};

/// Restricts every relation of sets to the given per-type node lists (global
/// ids, ascending).
GraphView induced_view(const std::vector<RelationSet>& sets,
                       std::vector<std::vector<std::int64_t>> nodes);

/// Starting from the seeds (target-type ids), hop h draws min(fanouts[h],
/// degree) distinct neighbors of each newly reached node in every base
/// relation, without replacement. fanout <= 0 keeps every neighbor. Each node
/// is expanded once, at the first hop that reaches it.
Subnetwork sample_batch(const HetGraph& g, const std::vector<RelationSet>& sets,
                        std::span<const std::int64_t> seeds, std::span<const int> fanouts,
                        std::uint64_t seed);

/// (train_graph, test_graph). The train graph keeps every node id but drops
/// every link incident to a test node, so test nodes are isolated; recompose
/// relation sets on it. The test graph is g.
std::pair<HetGraph, HetGraph> inductive_mask(const HetGraph& g);

}  // namespace latte
