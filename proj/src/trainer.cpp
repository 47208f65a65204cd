#include "latte/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "latte/error.hpp"
#include "latte/sampler.hpp"

namespace latte {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<int> unlimited(std::size_t layers) { return std::vector<int>(layers, 0); }

}  // namespace

TrainMode parse_mode(const std::string& name) {
  if (name == "transductive") return TrainMode::kTransductive;
  if (name == "inductive") return TrainMode::kInductive;
  throw ValidationError("unknown mode '" + name + "' (transductive|inductive)");
}

std::string mode_name(TrainMode m) {
  return m == TrainMode::kInductive ? "inductive" : "transductive";
}

void TrainConfig::validate(int layers) const {
  if (!(lr >= 0.0)) throw ValidationError("lr must be >= 0");
  if (batch_size < 1) throw ValidationError("batch size must be positive");
  if (patience < 1) throw ValidationError("patience must be >= 1");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be >= 0");
  if (epochs_max < 1) throw ValidationError("epochs must be >= 1");
  if (!(neg.ratio >= 0.0)) throw ValidationError("negative ratio must be >= 0");
  if (static_cast<int>(fanouts.size()) != layers) {
    throw ValidationError("need " + std::to_string(layers) + " fanouts, got " +
                          std::to_string(fanouts.size()));
  }
}

void AdamW::step(std::vector<NamedParameter>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.tensor.rows(), p.tensor.cols());
      v_.emplace_back(p.tensor.rows(), p.tensor.cols());
    }
  }
  if (m_.size() != params.size()) throw ValidationError("optimizer bound to another parameter list");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = params[k].tensor.mutable_value();
    const auto& g = params[k].tensor.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    const double decay = params[k].decays() ? lr_ * wd_ : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= decay * w[i];
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

bool EarlyStopper::update(int epoch, double loss) {
  improved_ = loss < best_;
  if (improved_) {
    best_ = loss;
    best_epoch_ = epoch;
    bad_ = 0;
  } else {
    ++bad_;
  }
  return bad_ >= patience_;
}

double macro_f1(std::span<const int> pred, std::span<const int> truth, int num_classes,
                std::vector<ClassScores>* per_class) {
  if (pred.size() != truth.size()) throw ValidationError("macro_f1: length mismatch");
  if (num_classes < 1) throw ValidationError("macro_f1: no classes");
  const auto G = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> tp(G, 0), fp(G, 0), fn(G, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = static_cast<std::size_t>(pred[i]);
    const auto y = static_cast<std::size_t>(truth[i]);
    if (p >= G || y >= G) throw ValidationError("macro_f1: class id out of range");
    if (p == y) {
      ++tp[y];
    } else {
      ++fp[p];
      ++fn[y];
    }
  }
  std::vector<ClassScores> scores(G);
  double sum = 0.0;
  for (std::size_t c = 0; c < G; ++c) {
    auto& s = scores[c];
    s.support = tp[c] + fn[c];
    s.precision = tp[c] + fp[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]) : 0.0;
    s.recall = s.support ? static_cast<double>(tp[c]) / static_cast<double>(s.support) : 0.0;
    s.f1 = tp[c] ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    sum += s.f1;
  }
  if (per_class) *per_class = std::move(scores);
  return sum / static_cast<double>(G);
}

double roc_auc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw ValidationError("roc_auc: need positive and negative scores");
  std::vector<std::pair<double, int>> all;
  all.reserve(pos.size() + neg.size());
  for (auto s : pos) all.push_back({s, 1});
  for (auto s : neg) all.push_back({s, 0});
  std::sort(all.begin(), all.end());
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second) rank_sum += mid;
    }
    i = j;
  }
  const auto np = static_cast<double>(pos.size());
  const auto nn = static_cast<double>(neg.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

HetGraph prepare_graph(const HetGraph& g, bool normalize) {
  auto out = add_reverse_relations(g);
  return normalize ? out.with_normalized_features() : out;
}

Matrix predict_proba(const LatteModel& model, const HetGraph& g, const std::vector<RelationSet>& sets,
                     std::span<const std::int64_t> nodes) {
  if (nodes.empty()) return Matrix(0, static_cast<std::size_t>(model.num_classes()));
  const auto fanouts = unlimited(sets.size());
  auto sub = sample_batch(g, sets, nodes, fanouts, 0);
  Tape tape;
  auto fwd = model.forward(tape, g, sub, {});
  auto rows = ops::gather_rows(tape, fwd.embedding[g.target_type()], sub.seeds);
  return model.classify(tape, rows).value();
}

Metrics evaluate(const LatteModel& model, const HetGraph& g, const std::vector<RelationSet>& sets,
                 std::span<const std::int64_t> nodes) {
  if (nodes.empty()) throw ValidationError("evaluate: empty split");
  auto probs = predict_proba(model, g, sets, nodes);
  Metrics out;
  out.n = nodes.size();
  std::vector<int> truth;
  double loss = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int y = g.labels().at(static_cast<std::size_t>(nodes[i]));
    if (y == kNoLabel) throw ValidationError("evaluate: unlabeled node in split");
    truth.push_back(y);
    auto row = probs.row(i);
    out.predictions.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    loss -= std::log(std::max(row[static_cast<std::size_t>(y)], 1e-12));
  }
  out.loss = loss / static_cast<double>(nodes.size());
  out.macro_f1 = macro_f1(out.predictions, truth, g.num_classes(), &out.per_class);
  return out;
}

std::vector<double> score_links(const LatteModel& model, const HetGraph& g,
                                const std::vector<RelationSet>& sets, int t, std::size_t r,
                                std::span<const std::int64_t> src, std::span<const std::int64_t> dst) {
  if (t < 1 || static_cast<std::size_t>(t) > sets.size() || r >= sets[t - 1].size()) {
    throw ValidationError("score_links: no such relation");
  }
  auto view = full_view(g, sets);
  Tape tape;
  auto fwd = model.forward(tape, g, view, {});
  const auto& rel = sets[t - 1][r].relation;
  const auto& st = fwd.layers[t - 1];
  auto e = attention_scores(tape, st.source_context[rel.source()], st.target_context[rel.target()],
                            model.layer(t).kernel[r], src, dst);
  return e.value().data();
}

TrainHistory train(LatteModel& model, const HetGraph& g, const TrainConfig& cfg,
                   const std::optional<PruneRule>& prune, const EpochCallback& on_epoch,
                   const BatchCallback& on_batch) {
  cfg.validate(model.layers());
  const HetGraph train_graph =
      cfg.mode == TrainMode::kInductive ? inductive_mask(g).first : g;
  const auto sets = build_relation_sets(train_graph, model.layers(), prune);
  model.check_schema(sets);

  const auto& split = g.splits();
  if (split.train.empty()) throw ValidationError("train split is empty");

  TrainHistory history;
  for (const auto& set : sets) {
    history.relation_names.emplace_back();
    for (const auto& mem : set) history.relation_names.back().push_back(mem.relation.name(g));
  }

  AdamW opt(cfg.lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps);
  EarlyStopper stopper(cfg.patience);
  auto best = model.snapshot();
  std::vector<std::int64_t> order(split.train.begin(), split.train.end());
  std::uint64_t batch_index = 0;

  for (int epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
    std::mt19937_64 rng(mix(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    for (const auto& set : sets) rec.proximity.emplace_back(set.size(), 0.0);
    std::vector<std::vector<int>> prox_count;
    for (const auto& set : sets) prox_count.emplace_back(set.size(), 0);
    std::size_t n_batches = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::span<const std::int64_t> seeds(order.data() + start, stop - start);
      const auto batch_seed = mix(cfg.seed ^ 0x5bd1e995ULL, batch_index);
      auto sub = sample_batch(train_graph, sets, seeds, cfg.fanouts, batch_seed);
      if (on_batch) on_batch(sub);

      Tape tape;
      model.zero_grad();
      LossOptions lo;
      lo.use_proximity = cfg.use_proximity;
      lo.neg = cfg.neg;
      lo.batch_index = batch_index;
      lo.forward = {true, mix(batch_seed, 1)};
      auto loss = total_loss(tape, model, train_graph, sets, sub, sub.seeds, lo);
      const double value = loss.total.item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(n_batches + 1));
      }
      tape.backward(loss.total);
      opt.step(model.parameters());

      rec.train_loss += value;
      history.negatives_truncated = history.negatives_truncated || loss.negatives_truncated;
      for (std::size_t l = 0; l < loss.proximity.size(); ++l) {
        for (std::size_t r = 0; r < loss.proximity[l].size(); ++r) {
          if (std::isnan(loss.proximity[l][r])) continue;
          rec.proximity[l][r] += loss.proximity[l][r];
          ++prox_count[l][r];
        }
      }
      ++n_batches;
      ++batch_index;
    }
    rec.train_loss /= static_cast<double>(n_batches);
    for (std::size_t l = 0; l < rec.proximity.size(); ++l) {
      for (std::size_t r = 0; r < rec.proximity[l].size(); ++r) {
        rec.proximity[l][r] = prox_count[l][r] ? rec.proximity[l][r] / prox_count[l][r]
                                               : std::numeric_limits<double>::quiet_NaN();
      }
    }

    if (split.valid.empty()) {
      rec.val_loss = rec.train_loss;
      rec.val_macro_f1 = std::numeric_limits<double>::quiet_NaN();
    } else {
      auto m = evaluate(model, train_graph, sets, split.valid);
      rec.val_loss = m.loss;
      rec.val_macro_f1 = m.macro_f1;
    }
    if (!std::isfinite(rec.val_loss)) {
      throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    }

    const bool done = stopper.update(epoch, rec.val_loss);
    if (stopper.improved()) best = model.snapshot();
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (done) {
      history.early_stopped = true;
      break;
    }
  }
  model.restore(best);
  history.best_epoch = stopper.best_epoch();
  return history;
}

void write_train_log(const TrainHistory& history, const std::filesystem::path& file) {
  std::FILE* f = std::fopen(file.string().c_str(), "w");
  if (!f) throw ValidationError("cannot write " + file.string());
  std::fputs("epoch,train_loss,val_loss,val_macro_f1", f);
  for (const auto& order : history.relation_names) {
    for (const auto& name : order) std::fprintf(f, ",prox_%s", name.c_str());
  }
  std::fputc('\n', f);
  for (const auto& rec : history.epochs) {
    std::fprintf(f, "%d,%.10g,%.10g,%.10g", rec.epoch, rec.train_loss, rec.val_loss, rec.val_macro_f1);
    for (const auto& order : rec.proximity) {
      for (auto v : order) std::fprintf(f, ",%.10g", v);
    }
    std::fputc('\n', f);
  }
  std::fclose(f);
}

GradCheckResult gradcheck_end_to_end(std::uint64_t seed, double eps) {
  SynthConfig sc;
  sc.n_target = 14;
  sc.n_aux = 10;
  sc.n_noise = 6;
  sc.feature_dim = 4;
  sc.num_classes = 3;
  sc.aux_per_target = 2;
  sc.noise_per_target = 2;
  sc.noise_attributed = false;
  const auto g = prepare_graph(synth_generate(sc, seed), false);
  const auto sets = build_relation_sets(g, 2);
  ModelConfig mc;
  mc.layers = 2;
  mc.dim = 3;
  mc.dropout = 0.0;
  mc.seed = seed;
  LatteModel model(g, sets, mc);
  // Zero biases put every all-zero embedding row exactly on a relu kink.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  for (auto& p : model.parameters()) {
    if (p.kind != ParamKind::kBias) continue;
    for (auto& v : p.tensor.mutable_value().data()) v = jitter(rng);
  }
  const auto view = full_view(g, sets);
  const auto& labeled = g.splits().train;
  LossOptions lo;
  lo.use_proximity = true;
  lo.neg = {2.0, seed};
  auto f = [&](Tape& tape) {
    return total_loss(tape, model, g, sets, view, labeled, lo).total;
  };
  std::vector<Tensor> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  return grad_check(f, params, eps);
}

}  // namespace latte
