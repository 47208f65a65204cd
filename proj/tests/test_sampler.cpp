#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "latte/error.hpp"
#include "latte/sampler.hpp"
#include "latte/trainer.hpp"

using namespace latte;

namespace {

HetGraph star(std::int64_t degree) {
  fixture::GraphSpec s{{"P", "A"}, {1, degree}, {2, 2}, {}, 2};
  std::vector<Triple> t;
  for (std::int64_t j = 0; j < degree; ++j) t.push_back({0, j, 1.0});
  s.relations.push_back({"PA", 0, 1, SparseBiadj::from_triples(1, degree, t), true});
  return fixture::build_graph(s);
}

HetGraph random_graph(std::uint64_t seed, std::int64_t n_p = 40) {
  std::mt19937_64 rng(seed);
  fixture::GraphSpec s{{"P", "A", "C"}, {n_p, 20, 6}, {3, 2, 2}, {}, 3};
  s.relations.push_back({"PA", 0, 1, fixture::random_sparse(n_p, 20, 0.12, rng), true});
  s.relations.push_back({"PC", 0, 2, fixture::random_sparse(n_p, 6, 0.2, rng), true});
  return add_reverse_relations(fixture::build_graph(s, seed));
}

HetGraph with_splits(const HetGraph& g, Splits splits) {
  auto parts = g.parts();
  parts.splits = std::move(splits);
  return HetGraph(std::move(parts));
}

const SampledHop& hop_of(const Subnetwork& sub, std::int64_t node, std::size_t rel) {
  for (const auto& h : sub.hops) {
    if (h.node == node && h.relation == rel && h.type == 0) return h;
  }
  throw std::runtime_error("hop not found");
}

}  // namespace

TEST(SampleBatch, FanoutBelowDegree) {
  auto g = star(5);
  auto sets = build_relation_sets(g, 1);
  std::vector<std::int64_t> seeds{0};
  std::vector<int> fan{2};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto sub = sample_batch(g, sets, seeds, fan, seed);
    const auto& h = hop_of(sub, 0, 0);
    ASSERT_EQ(h.picked.size(), 2u);
    EXPECT_NE(h.picked[0], h.picked[1]);
    for (auto j : h.picked) EXPECT_TRUE(g.relation(0).matrix.contains(0, j));
    EXPECT_EQ(sub.nodes[1], h.picked);
    EXPECT_EQ(sub.edges[0][0].size(), 2u);
  }
}

TEST(SampleBatch, FanoutAboveDegreeKeepsAll) {
  auto g = star(3);
  auto sets = build_relation_sets(g, 1);
  std::vector<std::int64_t> seeds{0};
  std::vector<int> fan{10};
  auto sub = sample_batch(g, sets, seeds, fan, 1);
  EXPECT_EQ(hop_of(sub, 0, 0).picked, (std::vector<std::int64_t>{0, 1, 2}));
}

TEST(SampleBatch, LargeFanoutMatchesBfsOracle) {
  auto g = random_graph(3);
  auto sets = build_relation_sets(g, 2);
  std::vector<std::int64_t> seeds{1, 5, 9};
  std::vector<int> fan{1000, 1000};
  auto sub = sample_batch(g, sets, seeds, fan, 4);

  std::vector<std::set<std::int64_t>> reach(g.num_types());
  std::vector<std::vector<std::int64_t>> frontier(g.num_types());
  for (auto s : seeds) {
    reach[0].insert(s);
    frontier[0].push_back(s);
  }
  for (int hop = 0; hop < 2; ++hop) {
    std::vector<std::vector<std::int64_t>> next(g.num_types());
    for (const auto& rel : g.relations()) {
      for (auto i : frontier[rel.src]) {
        for (auto j : rel.matrix.row_indices(i)) {
          if (reach[rel.dst].insert(j).second) next[rel.dst].push_back(j);
        }
      }
    }
    frontier = next;
  }
  for (std::size_t t = 0; t < g.num_types(); ++t) {
    EXPECT_EQ(sub.nodes[t], std::vector<std::int64_t>(reach[t].begin(), reach[t].end())) << "type " << t;
  }
  for (std::size_t l = 0; l < sets.size(); ++l) {
    for (std::size_t r = 0; r < sets[l].size(); ++r) {
      const auto& mem = sets[l][r];
      std::set<std::pair<std::int64_t, std::int64_t>> want, got;
      for (const auto& e : mem.matrix.triples()) {
        if (reach[mem.relation.source()].count(e.row) && reach[mem.relation.target()].count(e.col)) {
          want.insert({e.row, e.col});
        }
      }
      const auto& el = sub.edges[l][r];
      for (std::size_t e = 0; e < el.size(); ++e) {
        const auto u = sub.nodes[mem.relation.source()][static_cast<std::size_t>(el.src[e])];
        const auto v = sub.nodes[mem.relation.target()][static_cast<std::size_t>(el.dst[e])];
        got.insert({u, v});
        EXPECT_EQ(el.weight[e], mem.matrix.at(u, v));
      }
      EXPECT_EQ(got, want) << mem.relation.name(g);
    }
  }
}

TEST(SampleBatch, NoDuplicatesAndSubsetOfRelation) {
  auto g = random_graph(5, 80);
  auto sets = build_relation_sets(g, 2);
  std::vector<std::int64_t> seeds{0, 2, 4, 6, 8, 10};
  std::vector<int> fan{2, 1};
  auto sub = sample_batch(g, sets, seeds, fan, 12);
  const auto& base = sets[0];
  for (const auto& h : sub.hops) {
    std::set<std::int64_t> uniq(h.picked.begin(), h.picked.end());
    EXPECT_EQ(uniq.size(), h.picked.size());
    EXPECT_LE(h.picked.size(), static_cast<std::size_t>(fan[static_cast<std::size_t>(h.hop)]));
    for (auto j : h.picked) EXPECT_TRUE(base[h.relation].matrix.contains(h.node, j));
  }
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    EXPECT_EQ(sub.nodes[0][static_cast<std::size_t>(sub.seeds[s])], seeds[s]);
  }
}

TEST(SampleBatch, Deterministic) {
  auto g = random_graph(6, 80);
  auto sets = build_relation_sets(g, 2);
  std::vector<std::int64_t> seeds{3, 1, 4, 15, 9, 26};
  std::vector<int> fan{2, 2};
  auto a = sample_batch(g, sets, seeds, fan, 77);
  auto b = sample_batch(g, sets, seeds, fan, 77);
  EXPECT_EQ(a.nodes, b.nodes);
  for (std::size_t l = 0; l < a.edges.size(); ++l) {
    for (std::size_t r = 0; r < a.edges[l].size(); ++r) {
      EXPECT_EQ(a.edges[l][r].src, b.edges[l][r].src);
      EXPECT_EQ(a.edges[l][r].dst, b.edges[l][r].dst);
    }
  }
  bool differs = false;
  for (std::uint64_t s = 0; s < 10 && !differs; ++s) differs = sample_batch(g, sets, seeds, fan, s).nodes != a.nodes;
  EXPECT_TRUE(differs);
}

TEST(SampleBatch, Errors) {
  auto g = star(3);
  auto sets = build_relation_sets(g, 1);
  std::vector<std::int64_t> seeds{0};
  std::vector<int> two{1, 1};
  EXPECT_THROW(sample_batch(g, sets, seeds, two, 0), ValidationError);
  std::vector<std::int64_t> bad{1};
  std::vector<int> one{1};
  EXPECT_THROW(sample_batch(g, sets, bad, one, 0), ValidationError);
}

TEST(InductiveMask, BridgeThroughTestNodeDisappears) {
  HetGraph::Parts p;
  p.node_types.push_back({"P", 3, 1});
  p.features.push_back(Matrix{{1.0}, {2.0}, {3.0}});
  p.relations.push_back(
      {"PP", 0, 0, SparseBiadj::from_triples(3, 3, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}}), false});
  p.num_classes = 2;
  p.labels = {0, 1, 0};
  p.splits = {{0}, {2}, {1}};
  HetGraph g(std::move(p));
  auto full = build_relation_sets(g, 2);
  ASSERT_EQ(full[1].size(), 1u);
  EXPECT_TRUE(full[1][0].matrix.contains(0, 2));

  auto [train, test] = inductive_mask(g);
  EXPECT_EQ(fingerprint(test), fingerprint(g));
  EXPECT_EQ(train.relation(0).matrix.nnz(), 0);
  auto masked = build_relation_sets(train, 2);
  ASSERT_EQ(masked[1].size(), 1u);
  EXPECT_EQ(masked[1][0].matrix.nnz(), 0);
  EXPECT_FALSE(masked[1][0].matrix.contains(0, 2));
}

TEST(InductiveMask, EmptyTestSplitKeepsGraph) {
  auto g = with_splits(random_graph(7), {{0, 1, 2}, {3}, {}});
  auto [train, test] = inductive_mask(g);
  EXPECT_EQ(fingerprint(train), fingerprint(g));
  EXPECT_EQ(fingerprint(test), fingerprint(g));
}

TEST(InductiveMask, TestNodesAreIsolatedInEveryRelation) {
  auto g0 = random_graph(8);
  auto g = with_splits(g0, {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {10, 11}, {12, 13, 14, 15, 16, 17}});
  auto train = inductive_mask(g).first;
  EXPECT_EQ(train.num_types(), g.num_types());
  for (TypeId t = 0; t < static_cast<TypeId>(g.num_types()); ++t) EXPECT_EQ(train.count(t), g.count(t));
  for (const auto& rel : train.relations()) {
    for (const auto& e : rel.matrix.triples()) {
      if (rel.src == 0) EXPECT_TRUE(e.row < 12 || e.row > 17);
      if (rel.dst == 0) EXPECT_TRUE(e.col < 12 || e.col > 17);
    }
  }
  for (const auto& set : build_relation_sets(train, 2)) {
    for (const auto& mem : set) {
      for (const auto& e : mem.matrix.triples()) {
        if (mem.relation.source() == 0) EXPECT_TRUE(e.row < 12 || e.row > 17);
        if (mem.relation.target() == 0) EXPECT_TRUE(e.col < 12 || e.col > 17);
      }
    }
  }
}

TEST(InductiveMask, TrainingBatchesNeverTouchTestNodes) {
  SynthConfig sc;
  sc.n_target = 200;
  sc.n_aux = 60;
  sc.n_noise = 20;
  sc.feature_dim = 6;
  auto g = prepare_graph(synth_generate(sc, 3), false);
  ASSERT_FALSE(g.splits().test.empty());
  std::set<std::int64_t> test(g.splits().test.begin(), g.splits().test.end());

  ModelConfig mc;
  mc.dim = 4;
  auto sets = build_relation_sets(inductive_mask(g).first, 2);
  LatteModel model(g, sets, mc);
  TrainConfig tc;
  tc.mode = TrainMode::kInductive;
  tc.batch_size = 16;
  tc.epochs_max = 2;
  tc.fanouts = {5, 5};
  std::size_t batches = 0, train_seen = 0;
  train(model, g, tc, std::nullopt, {}, [&](const Subnetwork& sub) {
    ++batches;
    for (auto id : sub.nodes[g.target_type()]) {
      EXPECT_EQ(test.count(id), 0u) << "test node " << id << " in batch " << batches;
    }
    train_seen += sub.seeds.size();
  });
  EXPECT_EQ(train_seen, 2 * g.splits().train.size());
  EXPECT_GT(batches, 10u);
}
