#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "latte/error.hpp"
#include "latte/interpret.hpp"

using namespace latte;

namespace {

HetGraph dense_graph(std::int64_t n_p, std::int64_t n_a, std::int64_t n_c) {
  std::mt19937_64 rng(1);
  fixture::GraphSpec s{{"P", "A", "C"}, {n_p, n_a, n_c}, {3, 2, 2}, {}, 2};
  s.relations.push_back({"PA", 0, 1, fixture::random_sparse(n_p, n_a, 1.0, rng), true});
  s.relations.push_back({"PC", 0, 2, fixture::random_sparse(n_p, n_c, 1.0, rng), true});
  return add_reverse_relations(fixture::build_graph(s, 2));
}

HetGraph sparse_graph(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  fixture::GraphSpec s{{"P", "A", "C"}, {30, 12, 5}, {3, 2, 0}, {}, 3};
  s.relations.push_back({"PA", 0, 1, fixture::random_sparse(30, 12, 0.15, rng), true});
  s.relations.push_back({"PC", 0, 2, fixture::random_sparse(30, 5, 0.2, rng), true});
  return add_reverse_relations(fixture::build_graph(s, seed));
}

void zero_choice_params(LatteModel& model) {
  for (auto& p : model.parameters()) {
    if (p.name.find(".W.") != std::string::npos || p.name.find(".b.") != std::string::npos) {
      p.tensor.mutable_value().fill(0.0);
    }
  }
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Pearson, Examples) {
  std::vector<double> x{1, 2, 3}, y{2, 4, 6}, neg{-1, -2, -3}, perm{1, 3, 2};
  EXPECT_NEAR(pearson(x, y).r, 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, neg).r, -1.0, 1e-15);
  EXPECT_NEAR(pearson(x, perm).r, 0.5, 1e-15);
  std::vector<double> flat{4, 4, 4};
  auto z = pearson(flat, x);
  EXPECT_TRUE(z.zero_variance);
  EXPECT_EQ(z.r, 0.0);
  std::vector<double> one{1};
  EXPECT_THROW(pearson(one, one), ValidationError);
  EXPECT_THROW(pearson(x, one), ValidationError);
}

TEST(Pearson, AffineInvariance) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> b(40), d(40);
  for (std::size_t i = 0; i < 40; ++i) {
    b[i] = n(rng);
    d[i] = 0.4 * b[i] + n(rng);
  }
  const double r = pearson(b, d).r;
  for (double a : {0.01, 3.0, 250.0}) {
    for (double c : {-5.0, 0.0, 17.0}) {
      std::vector<double> t(40), s(40);
      for (std::size_t i = 0; i < 40; ++i) {
        t[i] = a * b[i] + c;
        s[i] = a * d[i] + c;
      }
      EXPECT_NEAR(pearson(t, d).r, r, 1e-12);
      EXPECT_NEAR(pearson(b, s).r, r, 1e-12);
    }
  }
}

TEST(Summary, ZeroChoiceParamsGiveUniformWeights) {
  auto g = dense_graph(6, 4, 3);
  auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.dim = 4;
  LatteModel model(g, sets, mc);
  zero_choice_params(model);
  auto report = relation_weight_summary(model, g, sets);
  std::map<std::pair<int, TypeId>, std::size_t> k;
  for (const auto& e : report.entries) ++k[{e.layer, e.type}];
  for (const auto& e : report.entries) {
    const double choices = static_cast<double>(k[{e.layer, e.type}]);
    EXPECT_NEAR(e.mean_beta, 1.0 / choices, 1e-15) << e.name;
    EXPECT_NEAR(e.std_beta, 0.0, 1e-15) << e.name;
  }
  EXPECT_EQ((k[{1, 0}]), 3u);
}

TEST(Summary, MeansSumToOnePerTypeAndLayer) {
  auto g = sparse_graph(4);
  auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.dim = 5;
  LatteModel model(g, sets, mc);
  std::map<std::pair<int, TypeId>, double> total;
  for (const auto& e : relation_weight_summary(model, g, sets).entries) {
    EXPECT_GE(e.mean_beta, 0.0);
    EXPECT_LE(e.mean_beta, 1.0);
    total[{e.layer, e.type}] += e.mean_beta;
  }
  EXPECT_EQ(total.size(), 6u);
  for (const auto& [key, s] : total) EXPECT_NEAR(s, 1.0, 1e-12);

  for (const auto& layer : relation_weight_matrices(model, g, sets)) {
    for (const auto& b : layer) {
      for (std::size_t i = 0; i < b.rows(); ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < b.cols(); ++c) s += b(i, c);
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
    }
  }
}

TEST(Summary, SelfNamesFollowLayer) {
  EXPECT_EQ(self_choice_name("M", 1), "M");
  EXPECT_EQ(self_choice_name("M", 2), "M1");
  EXPECT_EQ(self_choice_name("P", 3), "P2");
  auto g = sparse_graph(5);
  auto sets = build_relation_sets(g, 2);
  LatteModel model(g, sets, {});
  std::set<std::string> names;
  for (const auto& e : relation_weight_summary(model, g, sets).entries) names.insert(e.name);
  for (const char* n : {"P", "P1", "A", "A1", "PA", "PC", "PAP", "PCP", "APA"}) EXPECT_TRUE(names.count(n)) << n;
}

TEST(Summary, SingleNodeHasZeroSpread) {
  HetGraph::Parts p;
  p.node_types.push_back({"P", 1, 2});
  p.node_types.push_back({"A", 1, 2});
  p.features = {Matrix{{0.3, 0.7}}, Matrix{{-1.0, 2.0}}};
  p.relations.push_back({"PA", 0, 1, SparseBiadj::from_triples(1, 1, {{0, 0, 1.0}}), true});
  p.num_classes = 2;
  p.labels = {0};
  auto g = add_reverse_relations(HetGraph(std::move(p)));
  auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.dim = 3;
  LatteModel model(g, sets, mc);
  for (const auto& e : relation_weight_summary(model, g, sets).entries) {
    EXPECT_EQ(e.std_beta, 0.0);
    EXPECT_EQ(e.n_nodes, 1u);
  }
  EXPECT_TRUE(weight_degree_correlation(model, g, sets).empty());
}

TEST(Correlation, ConstantBetaIsFlagged) {
  auto g = sparse_graph(6);
  auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.dim = 3;
  LatteModel model(g, sets, mc);
  zero_choice_params(model);
  auto dense = dense_graph(6, 4, 3);
  auto dsets = build_relation_sets(dense, 2);
  LatteModel dm(dense, dsets, mc);
  zero_choice_params(dm);
  for (const auto& e : weight_degree_correlation(dm, dense, dsets)) {
    EXPECT_TRUE(e.zero_variance) << e.name;
    EXPECT_EQ(e.pearson_r, 0.0);
  }
  for (const auto& e : weight_degree_correlation(model, g, sets)) {
    EXPECT_GE(e.pearson_r, -1.0 - 1e-12);
    EXPECT_LE(e.pearson_r, 1.0 + 1e-12);
  }
}

TEST(Correlation, MatchesDirectComputation) {
  auto g = sparse_graph(7);
  auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.dim = 4;
  LatteModel model(g, sets, mc);
  auto betas = relation_weight_matrices(model, g, sets);
  const auto& rels = model.layer(1).relations_from[0];
  auto entries = weight_degree_correlation(model, g, sets, false);
  std::vector<double> beta_pa(30), deg_pa(30), beta_self(30), deg_all(30, 0.0);
  for (std::size_t i = 0; i < 30; ++i) {
    beta_self[i] = betas[0][0](i, 0);
    beta_pa[i] = betas[0][0](i, 1);
    deg_pa[i] = static_cast<double>(sets[0][rels[0]].matrix.degree(static_cast<std::int64_t>(i)));
    for (auto r : rels) deg_all[i] += static_cast<double>(sets[0][r].matrix.degree(static_cast<std::int64_t>(i)));
  }
  const auto& first = sets[0][rels[0]].relation;
  for (const auto& e : entries) {
    if (e.layer != 1 || e.type != 0) continue;
    if (e.self) EXPECT_NEAR(e.pearson_r, pearson(beta_self, deg_all).r, 1e-12);
    if (e.name == first.name(g)) EXPECT_NEAR(e.pearson_r, pearson(beta_pa, deg_pa).r, 1e-12);
  }
}

TEST(Writers, CsvAndSvg) {
  auto g = sparse_graph(8);
  auto sets = build_relation_sets(g, 2);
  LatteModel model(g, sets, {});
  auto dir = fixture::temp_dir("interpret");
  auto report = relation_weight_summary(model, g, sets);
  write_attention_summary(report, dir / "attention_summary.csv");
  write_correlation(weight_degree_correlation(model, g, sets), dir / "correlation.csv");
  write_summary_svg(report, dir / "summary.svg");
  auto a = slurp(dir / "attention_summary.csv");
  EXPECT_EQ(a.rfind("layer,relation_path,mean_beta,std_beta\n", 0), 0u);
  EXPECT_NE(a.find("\n1,PA,"), std::string::npos);
  EXPECT_EQ(slurp(dir / "correlation.csv").rfind("relation_path,pearson_r,n_nodes\n", 0), 0u);
  auto svg = slurp(dir / "summary.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  std::filesystem::remove_all(dir);
}
