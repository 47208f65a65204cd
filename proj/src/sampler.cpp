#include "latte/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "latte/error.hpp"

namespace latte {

GraphView induced_view(const std::vector<RelationSet>& sets,
                       std::vector<std::vector<std::int64_t>> nodes) {
  GraphView view;
  view.nodes = std::move(nodes);
  std::vector<std::vector<std::int64_t>> local(view.nodes.size());
  auto local_of = [&](TypeId t, std::int64_t count) -> const std::vector<std::int64_t>& {
    auto& map = local[t];
    if (map.empty() && count > 0) {
      map.assign(static_cast<std::size_t>(count), -1);
      for (std::size_t i = 0; i < view.nodes[t].size(); ++i) {
        map[static_cast<std::size_t>(view.nodes[t][i])] = static_cast<std::int64_t>(i);
      }
    }
    return map;
  };
  for (const auto& set : sets) {
    std::vector<EdgeList> per_rel;
    for (const auto& mem : set) {
      const auto m = mem.relation.source();
      const auto p = mem.relation.target();
      const auto& dst_local = local_of(p, mem.matrix.n_cols());
      EdgeList e;
      const auto& rows = view.nodes[m];
      for (std::size_t i = 0; i < rows.size(); ++i) {
        auto cols = mem.matrix.row_indices(rows[i]);
        auto vals = mem.matrix.row_values(rows[i]);
        for (std::size_t k = 0; k < cols.size(); ++k) {
          const auto j = dst_local[static_cast<std::size_t>(cols[k])];
          if (j < 0) continue;
          e.src.push_back(static_cast<std::int64_t>(i));
          e.dst.push_back(j);
          e.weight.push_back(vals[k]);
        }
      }
      per_rel.push_back(std::move(e));
    }
    view.edges.push_back(std::move(per_rel));
  }
  return view;
}

GraphView full_view(const HetGraph& g, const std::vector<RelationSet>& sets) {
  std::vector<std::vector<std::int64_t>> nodes(g.num_types());
  for (std::size_t t = 0; t < nodes.size(); ++t) {
    nodes[t].resize(static_cast<std::size_t>(g.count(static_cast<TypeId>(t))));
    std::iota(nodes[t].begin(), nodes[t].end(), 0);
  }
  return induced_view(sets, std::move(nodes));
}

Subnetwork sample_batch(const HetGraph& g, const std::vector<RelationSet>& sets,
                        std::span<const std::int64_t> seeds, std::span<const int> fanouts,
                        std::uint64_t seed) {
  if (sets.empty()) throw ValidationError("sample_batch: no relation sets");
  if (fanouts.size() != sets.size()) throw ValidationError("need one fanout per layer");
  const auto target = g.target_type();
  const auto& base = sets.front();
  std::mt19937_64 rng(seed);

  std::vector<std::vector<char>> seen(g.num_types());
  for (std::size_t t = 0; t < seen.size(); ++t) {
    seen[t].assign(static_cast<std::size_t>(g.count(static_cast<TypeId>(t))), 0);
  }
  std::vector<std::vector<std::int64_t>> frontier(g.num_types());
  for (auto s : seeds) {
    if (s < 0 || s >= g.count(target)) throw ValidationError("sample_batch: seed out of range");
    if (!seen[target][static_cast<std::size_t>(s)]) {
      seen[target][static_cast<std::size_t>(s)] = 1;
      frontier[target].push_back(s);
    }
  }

  Subnetwork sub;
  std::vector<std::int64_t> pool;
  for (std::size_t h = 0; h < fanouts.size(); ++h) {
    std::vector<std::vector<std::int64_t>> next(g.num_types());
    for (std::size_t t = 0; t < frontier.size(); ++t) {
      auto& layer = frontier[t];
      std::sort(layer.begin(), layer.end());
      for (auto node : layer) {
        for (auto r : base.indices_from(static_cast<TypeId>(t))) {
          const auto& mem = base[r];
          auto cols = mem.matrix.row_indices(node);
          if (cols.empty()) continue;
          pool.assign(cols.begin(), cols.end());
          std::size_t keep = pool.size();
          if (fanouts[h] > 0 && static_cast<std::size_t>(fanouts[h]) < keep) {
            keep = static_cast<std::size_t>(fanouts[h]);
            for (std::size_t k = 0; k < keep; ++k) {
              std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
              std::swap(pool[k], pool[pick(rng)]);
            }
            pool.resize(keep);
            std::sort(pool.begin(), pool.end());
          }
          const auto p = mem.relation.target();
          for (auto j : pool) {
            auto& flag = seen[p][static_cast<std::size_t>(j)];
            if (!flag) {
              flag = 1;
              next[p].push_back(j);
            }
          }
          sub.hops.push_back({static_cast<int>(h), static_cast<TypeId>(t), node, r, pool});
        }
      }
    }
    frontier = std::move(next);
  }

  std::vector<std::vector<std::int64_t>> nodes(g.num_types());
  for (std::size_t t = 0; t < nodes.size(); ++t) {
    for (std::size_t i = 0; i < seen[t].size(); ++i) {
      if (seen[t][i]) nodes[t].push_back(static_cast<std::int64_t>(i));
    }
  }
  auto view = induced_view(sets, std::move(nodes));
  sub.nodes = std::move(view.nodes);
  sub.edges = std::move(view.edges);
  for (auto s : seeds) {
    const auto& ids = sub.nodes[target];
    sub.seeds.push_back(std::lower_bound(ids.begin(), ids.end(), s) - ids.begin());
  }
  return sub;
}

std::pair<HetGraph, HetGraph> inductive_mask(const HetGraph& g) {
  const auto target = g.target_type();
  const auto& test = g.splits().test;
  if (test.empty()) return {g, g};
  std::vector<char> is_test(static_cast<std::size_t>(g.count(target)), 0);
  for (auto i : test) is_test[static_cast<std::size_t>(i)] = 1;
  std::vector<Relation> rels;
  for (const auto& r : g.relations()) {
    Relation masked = r;
    const bool src_t = r.src == target;
    const bool dst_t = r.dst == target;
    if (src_t || dst_t) {
      masked.matrix = r.matrix.filter([&](std::int64_t row, std::int64_t col, double) {
        return !(src_t && is_test[static_cast<std::size_t>(row)]) &&
               !(dst_t && is_test[static_cast<std::size_t>(col)]);
      });
    }
    rels.push_back(std::move(masked));
  }
  return {g.with_relations(std::move(rels)), g};
}

}  // namespace latte
