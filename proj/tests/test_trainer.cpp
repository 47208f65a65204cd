#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "fixtures.hpp"
#include "latte/error.hpp"
#include "latte/trainer.hpp"

using namespace latte;

namespace {

HetGraph planted(std::uint64_t seed, std::int64_t n = 300) {
  SynthConfig sc;
  sc.n_target = n;
  sc.n_aux = n / 3;
  sc.feature_dim = 6;
  return prepare_graph(synth_generate(sc, seed), false);
}

std::uint64_t hash(const std::vector<Matrix>& ms) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& m : ms) {
    for (auto v : m.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace

TEST(MacroF1, Examples) {
  std::vector<int> t{0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(macro_f1(t, t, 2), 1.0);
  std::vector<int> truth{0, 0, 1, 1}, pred{0, 1, 1, 1};
  std::vector<ClassScores> pc;
  EXPECT_NEAR(macro_f1(pred, truth, 2, &pc), (2.0 / 3.0 + 0.8) / 2.0, 1e-15);
  EXPECT_NEAR(macro_f1(pred, truth, 2), 0.7333, 5e-5);
  EXPECT_NEAR(pc[0].f1, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(pc[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(pc[0].recall, 0.5);
  EXPECT_EQ(pc[1].support, 2u);

  std::vector<int> bal{0, 1, 2, 0, 1, 2}, ones(6, 1);
  EXPECT_NEAR(macro_f1(ones, bal, 3), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(macro_f1(ones, bal, 3), 0.1667, 5e-5);

  // A class absent from truth and prediction still counts, with F1 = 0.
  std::vector<int> two{0, 1};
  EXPECT_DOUBLE_EQ(macro_f1(two, two, 3), 2.0 / 3.0);
  std::vector<int> one{0};
  EXPECT_THROW(macro_f1(one, two, 2), ValidationError);
}

TEST(RocAuc, Examples) {
  std::vector<double> pos{3, 4}, neg{1, 2};
  EXPECT_DOUBLE_EQ(roc_auc(pos, neg), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(neg, pos), 0.0);
  std::vector<double> a{1, 1}, b{1};
  EXPECT_DOUBLE_EQ(roc_auc(a, b), 0.5);
  std::vector<double> p2{0.9, 0.4}, n2{0.5, 0.1};
  EXPECT_DOUBLE_EQ(roc_auc(p2, n2), 0.75);
}

TEST(EarlyStopper, StopsAfterPatienceAndKeepsBest) {
  EarlyStopper s(10);
  std::vector<double> losses{1.0, 0.9};
  for (int i = 0; i < 10; ++i) losses.push_back(0.95);
  int stopped = 0;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    if (s.update(static_cast<int>(e + 1), losses[e])) {
      stopped = static_cast<int>(e + 1);
      break;
    }
  }
  EXPECT_EQ(stopped, 12);
  EXPECT_EQ(s.best_epoch(), 2);
  EXPECT_DOUBLE_EQ(s.best_loss(), 0.9);
}

TEST(AdamW, DecayOnlyTouchesWeightsAndEmbeddings) {
  auto g = planted(1, 60);
  auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.dim = 4;
  LatteModel model(g, sets, mc);
  for (auto& p : model.parameters()) {
    for (auto& v : p.tensor.mutable_value().data()) v += 0.5;
  }
  auto before = model.snapshot();
  model.zero_grad();
  AdamW opt(0.1, 0.5);
  opt.step(model.parameters());
  auto after = model.snapshot();
  std::size_t biases = 0, temps = 0;
  for (std::size_t k = 0; k < before.size(); ++k) {
    const auto& p = model.parameters()[k];
    biases += p.kind == ParamKind::kBias;
    temps += p.kind == ParamKind::kTemperature;
    for (std::size_t i = 0; i < before[k].size(); ++i) {
      const double expect = p.decays() ? before[k][i] * (1.0 - 0.05) : before[k][i];
      EXPECT_DOUBLE_EQ(after[k][i], expect) << p.name;
    }
  }
  EXPECT_GT(biases, 0u);
  EXPECT_GT(temps, 0u);
  EXPECT_TRUE(model.parameter("layer1.b.P").kind == ParamKind::kBias);
  EXPECT_FALSE(model.parameter("layer1.tau.PA").decays());
  EXPECT_TRUE(model.parameter("layer1.U.P").decays());
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  auto g = planted(2, 90);
  auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.dim = 4;
  LatteModel model(g, sets, mc);
  auto before = model.snapshot();
  TrainConfig tc;
  tc.lr = 0.0;
  tc.epochs_max = 1;
  tc.batch_size = 16;
  train(model, g, tc);
  EXPECT_EQ(hash(model.snapshot()), hash(before));
}

TEST(Train, RestoresBestValidationParameters) {
  auto g = planted(3, 120);
  auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.dim = 6;
  LatteModel model(g, sets, mc);
  TrainConfig tc;
  tc.lr = 0.05;
  tc.batch_size = 32;
  tc.patience = 3;
  tc.epochs_max = 25;
  std::vector<std::uint64_t> per_epoch;
  auto hist = train(model, g, tc, std::nullopt, [&](const EpochRecord&) { per_epoch.push_back(hash(model.snapshot())); });
  ASSERT_GE(hist.best_epoch, 1);
  ASSERT_EQ(per_epoch.size(), hist.epochs.size());
  EXPECT_EQ(hash(model.snapshot()), per_epoch[static_cast<std::size_t>(hist.best_epoch - 1)]);
  double best = 1e300;
  for (const auto& e : hist.epochs) best = std::min(best, e.val_loss);
  EXPECT_EQ(hist.epochs[static_cast<std::size_t>(hist.best_epoch - 1)].val_loss, best);
  EXPECT_NEAR(evaluate(model, g, sets, g.splits().valid).loss, best, 1e-12);
}

TEST(Train, LossHalvesByEpochTwentyOnPlantedSynthetic) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto g = planted(100 + seed);
    auto sets = build_relation_sets(g, 2);
    ModelConfig mc;
    mc.dim = 16;
    mc.seed = seed;
    LatteModel model(g, sets, mc);
    TrainConfig tc;
    tc.lr = 0.01;
    tc.batch_size = 64;
    tc.patience = 100;
    tc.epochs_max = 20;
    tc.seed = seed;
    auto hist = train(model, g, tc);
    ASSERT_EQ(hist.epochs.size(), 20u);
    EXPECT_LT(hist.epochs[19].train_loss, 0.5 * hist.epochs[0].train_loss) << "seed " << seed;
  }
}

TEST(Train, ValidationErrors) {
  auto g = planted(4, 60);
  auto sets = build_relation_sets(g, 2);
  LatteModel model(g, sets, {});
  TrainConfig tc;
  tc.fanouts = {5};
  EXPECT_THROW(train(model, g, tc), ValidationError);
  tc.fanouts = {5, 5};
  tc.patience = 0;
  EXPECT_THROW(train(model, g, tc), ValidationError);
  EXPECT_THROW(parse_mode("semi"), ValidationError);
  std::vector<std::int64_t> none;
  EXPECT_THROW(evaluate(model, g, sets, none), ValidationError);
}

TEST(Evaluate, DeterministicAndConsistentWithPredictions) {
  auto g = planted(5, 90);
  auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.dim = 4;
  LatteModel model(g, sets, mc);
  const auto& test = g.splits().test;
  auto a = evaluate(model, g, sets, test);
  auto b = evaluate(model, g, sets, test);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.n, test.size());
  std::vector<int> truth;
  for (auto i : test) truth.push_back(g.labels()[static_cast<std::size_t>(i)]);
  EXPECT_DOUBLE_EQ(a.macro_f1, macro_f1(a.predictions, truth, g.num_classes()));
  auto p = predict_proba(model, g, sets, test);
  double ce = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) ce -= std::log(p(i, static_cast<std::size_t>(truth[i])));
  EXPECT_NEAR(a.loss, ce / static_cast<double>(test.size()), 1e-12);
}

TEST(Train, LogHasRelationColumns) {
  auto g = planted(6, 60);
  auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.dim = 3;
  LatteModel model(g, sets, mc);
  TrainConfig tc;
  tc.epochs_max = 2;
  tc.batch_size = 32;
  auto hist = train(model, g, tc);
  auto dir = fixture::temp_dir("trainlog");
  write_train_log(hist, dir / "train_log.csv");
  std::ifstream in(dir / "train_log.csv");
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("epoch,train_loss,val_loss,val_macro_f1,prox_PA,prox_AP", 0), 0u) << header;
  EXPECT_NE(header.find("prox_PAP"), std::string::npos);
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  EXPECT_EQ(rows, 2);
  std::filesystem::remove_all(dir);
}
