#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latte/model.hpp"
#include "latte/objectives.hpp"
#include "latte/sampler.hpp"

namespace latte {

enum class TrainMode { kTransductive, kInductive };

TrainMode parse_mode(const std::string& name);
std::string mode_name(TrainMode m);

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 2048;
  int patience = 10;
  /// Decoupled decay on weights and embedding tables; never biases or
  /// temperatures.
  double weight_decay = 0.01;
  int epochs_max = 200;
  TrainMode mode = TrainMode::kTransductive;
  bool use_proximity = true;
  std::vector<int> fanouts{25, 20};
  NegSampleConfig neg;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Throws ValidationError on out-of-range settings.
  void validate(int layers) const;
};

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(std::vector<NamedParameter>& params);
  long steps() const { return t_; }

 private:
  double lr_, wd_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Stops once `patience` epochs in a row fail to lower the best loss.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  /// Records the loss of `epoch`; true when training should stop.
  bool update(int epoch, double loss);
  /// True when the last update set a new best.
  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }

 private:
  int patience_;
  int bad_ = 0;
  int best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;
  /// proximity[t-1][r] averaged over the epoch's batches; NaN when unused.
  std::vector<std::vector<double>> proximity;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool early_stopped = false;
  bool negatives_truncated = false;
  /// "PA", "PAP", ... per order, for log headers.
  std::vector<std::vector<std::string>> relation_names;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  double macro_f1 = 0.0;
  std::vector<ClassScores> per_class;
  std::size_t n = 0;
  /// Mean cross-entropy over the evaluated nodes.
  double loss = 0.0;
  std::vector<int> predictions;
};

/// Unweighted mean of per-class F1 over all G classes; a class with no
/// true-positive counts F1 = 0.
double macro_f1(std::span<const int> pred, std::span<const int> truth, int num_classes,
                std::vector<ClassScores>* per_class = nullptr);

/// Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg).
double roc_auc(std::span<const double> pos, std::span<const double> neg);

/// Reverse injection plus optional row-L2 feature normalization.
HetGraph prepare_graph(const HetGraph& g, bool normalize);

/// Class probabilities for the given target-type nodes, inference mode, over
/// the full receptive field of each node.
Matrix predict_proba(const LatteModel& model, const HetGraph& g, const std::vector<RelationSet>& sets,
                     std::span<const std::int64_t> nodes);

/// Argmax predictions and Macro-F1 on nodes; throws ValidationError when empty.
Metrics evaluate(const LatteModel& model, const HetGraph& g, const std::vector<RelationSet>& sets,
                 std::span<const std::int64_t> nodes);

/// Raw attention scores e of arbitrary (source, target) global pairs for
/// member r of A^t, computed over the full graph in inference mode.
std::vector<double> score_links(const LatteModel& model, const HetGraph& g,
                                const std::vector<RelationSet>& sets, int t, std::size_t r,
                                std::span<const std::int64_t> src, std::span<const std::int64_t> dst);

using EpochCallback = std::function<void(const EpochRecord&)>;
/// Sees every training batch before its loss is computed.
using BatchCallback = std::function<void(const Subnetwork&)>;

/// Mini-batch training on the train split with early stopping on validation
/// loss; the best-validation parameters are restored before returning. In
/// inductive mode the relation sets are recomposed on the masked graph and
/// test nodes never enter a batch. g must already be prepared.
TrainHistory train(LatteModel& model, const HetGraph& g, const TrainConfig& cfg,
                   const std::optional<PruneRule>& prune = std::nullopt,
                   const EpochCallback& on_epoch = {}, const BatchCallback& on_batch = {});

void write_train_log(const TrainHistory& history, const std::filesystem::path& file);

/// Finite-difference check of total_loss (two layers, proximity on, dropout
/// off) on a 30-node synthetic graph with types P, A and an unattributed C.
GradCheckResult gradcheck_end_to_end(std::uint64_t seed, double eps = 1e-5);

}  // namespace latte
