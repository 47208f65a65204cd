#include "latte/relalgebra.hpp"

#include <algorithm>
#include <numeric>

#include "latte/error.hpp"
#include "latte/kernels.hpp"

namespace latte {

std::string MetaRelation::name(const HetGraph& g) const {
  bool canonical = true;
  for (std::size_t h = 0; h < edge_names.size(); ++h) {
    if (edge_names[h] != g.node_type(path[h]).name + g.node_type(path[h + 1]).name) {
      canonical = false;
      break;
    }
  }
  std::string out;
  if (canonical) {
    for (auto t : path) out += g.node_type(t).name;
    return out;
  }
  for (std::size_t h = 0; h < edge_names.size(); ++h) {
    if (h) out += '.';
    out += edge_names[h];
  }
  return out;
}

void RelationSet::insert(MetaRelation relation, SparseBiadj matrix) {
  if (relation.order() != order_ || relation.edge_names.size() != relation.path.size() - 1) {
    throw ValidationError("meta relation of order " + std::to_string(relation.order()) +
                          " inserted into order-" + std::to_string(order_) + " set");
  }
  if (find(relation)) throw ValidationError("duplicate meta relation in set");
  members_.push_back({std::move(relation), std::move(matrix)});
}

std::optional<std::size_t> RelationSet::find(const MetaRelation& r) const {
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (members_[i].relation == r) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> RelationSet::indices_from(TypeId m) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (members_[i].relation.source() == m) out.push_back(i);
  }
  return out;
}

RelationSet base_relations(const HetGraph& g) {
  RelationSet rs(1);
  for (const auto& r : g.relations()) rs.insert({{r.src, r.dst}, {r.name}}, r.matrix);
  return rs;
}

SparseBiadj compose(const SparseBiadj& a_mn, const SparseBiadj& a_np) {
  if (a_mn.n_cols() != a_np.n_rows()) {
    throw ValidationError("compose inner dimension mismatch: " + std::to_string(a_mn.n_cols()) +
                          " vs " + std::to_string(a_np.n_rows()));
  }
  auto degree = a_mn.col_sums();
  const auto out_degree = a_np.row_sums();
  std::vector<double> inv(degree.size());
  for (std::size_t j = 0; j < degree.size(); ++j) {
    const double d = degree[j] + out_degree[j];
    inv[j] = d > 0.0 ? 1.0 / d : 0.0;
  }
  return kernels::spgemm_scaled(a_mn, inv, a_np);
}

RelationSet lift(const RelationSet& prev, const RelationSet& base) {
  if (base.order() != 1) throw ValidationError("lift requires an order-1 base set");
  RelationSet out(prev.order() + 1);
  for (const auto& left : prev) {
    for (const auto& right : base) {
      if (left.relation.target() != right.relation.source()) continue;
      MetaRelation r = left.relation;
      r.path.push_back(right.relation.target());
      r.edge_names.push_back(right.relation.edge_names.front());
      out.insert(std::move(r), compose(left.matrix, right.matrix));
    }
  }
  return out;
}

RelationSet relations_from(const RelationSet& rs, TypeId m) {
  RelationSet out(rs.order());
  for (auto i : rs.indices_from(m)) out.insert(rs[i].relation, rs[i].matrix);
  return out;
}

SparseBiadj prune(const SparseBiadj& a, const PruneRule& rule) {
  if (const auto* eps = std::get_if<PruneEpsilon>(&rule)) {
    if (eps->epsilon < 0.0) throw ValidationError("prune epsilon must be >= 0");
    return a.filter([e = eps->epsilon](std::int64_t, std::int64_t, double w) { return w >= e; });
  }
  const auto k = std::get<PruneTopK>(rule).k;
  if (k < 1) throw ValidationError("prune top_k must be >= 1");
  std::vector<char> keep(static_cast<std::size_t>(a.nnz()), 0);
  std::vector<std::int64_t> order;
  for (std::int64_t r = 0; r < a.n_rows(); ++r) {
    const auto base = a.indptr()[r];
    const auto deg = a.degree(r);
    order.resize(static_cast<std::size_t>(deg));
    std::iota(order.begin(), order.end(), 0);
    auto vals = a.row_values(r);
    // Columns are ascending, so a stable sort breaks ties by smaller column.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::int64_t x, std::int64_t y) { return vals[x] > vals[y]; });
    for (std::int64_t i = 0; i < std::min(k, deg); ++i) keep[base + order[i]] = 1;
  }
  std::int64_t pos = 0;
  return a.filter([&](std::int64_t, std::int64_t, double) { return keep[pos++] != 0; });
}

std::vector<RelationSet> build_relation_sets(const HetGraph& g, int layers,
                                             const std::optional<PruneRule>& rule) {
  if (layers < 1) throw ValidationError("need at least one layer");
  std::vector<RelationSet> sets;
  sets.push_back(base_relations(g));
  for (int t = 2; t <= layers; ++t) {
    auto next = lift(sets.back(), sets.front());
    if (rule) {
      RelationSet pruned(next.order());
      for (const auto& m : next) pruned.insert(m.relation, prune(m.matrix, *rule));
      next = std::move(pruned);
    }
    sets.push_back(std::move(next));
  }
  return sets;
}

}  // namespace latte
