#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latte/error.hpp"
#include "latte/interpret.hpp"
#include "latte/kernels.hpp"
#include "latte/sampler.hpp"
#include "latte/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace latte;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct GraphOptions {
  std::string data;
  bool normalize = false;
  double prune_epsilon = 0.0;
  std::int64_t prune_top_k = 0;

  std::optional<PruneRule> prune() const {
    if (prune_top_k > 0) return PruneRule{PruneTopK{prune_top_k}};
    if (prune_epsilon > 0.0) return PruneRule{PruneEpsilon{prune_epsilon}};
    return std::nullopt;
  }
};

void add_graph_options(CLI::App* cmd, GraphOptions& o) {
  cmd->add_option("--data", o.data, "Dataset directory")->required();
  cmd->add_option("--prune-epsilon", o.prune_epsilon, "Drop composed entries below this weight");
  cmd->add_option("--prune-top-k", o.prune_top_k, "Keep the k largest composed entries per row");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<int> parse_fanouts(const std::string& s) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    auto tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("bad --fanouts entry '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct Loaded {
  HetGraph graph;
  std::vector<RelationSet> sets;
};

Loaded load_checkpointed(const std::string& data, const std::string& checkpoint,
                         std::map<std::string, std::string>& meta,
                         std::optional<LatteModel>& model) {
  std::ifstream probe(checkpoint);
  if (!probe) throw ValidationError("missing file: " + checkpoint);
  json j = json::parse(probe, nullptr, false);
  if (j.is_discarded() || !j.contains("config")) throw ValidationError("unreadable checkpoint " + checkpoint);
  std::map<std::string, std::string> stored;
  if (j.contains("metadata")) stored = j["metadata"].get<std::map<std::string, std::string>>();
  const bool normalize = stored.count("normalize") && stored["normalize"] == "1";
  Loaded out{prepare_graph(load_dataset(data), normalize), {}};
  std::optional<PruneRule> rule;
  if (stored.count("prune_top_k") && std::stoll(stored["prune_top_k"]) > 0) {
    rule = PruneTopK{std::stoll(stored["prune_top_k"])};
  } else if (stored.count("prune_epsilon") && std::stod(stored["prune_epsilon"]) > 0.0) {
    rule = PruneEpsilon{std::stod(stored["prune_epsilon"])};
  }
  out.sets = build_relation_sets(out.graph, j["config"].value("layers", 2), rule);
  model.emplace(LatteModel::load(checkpoint, out.graph, out.sets, &meta));
  return out;
}

int cmd_ingest(const GraphOptions& o) {
  auto g = load_dataset(o.data);
  std::printf("dataset %s\nfingerprint %s\n", o.data.c_str(), hex64(fingerprint(g)).c_str());
  for (std::size_t t = 0; t < g.num_types(); ++t) {
    const auto& nt = g.node_type(static_cast<TypeId>(t));
    std::printf("node_type %s count=%lld features=%s\n", nt.name.c_str(), static_cast<long long>(nt.count),
                nt.feature_dim ? std::to_string(*nt.feature_dim).c_str() : "unattributed");
  }
  for (const auto& r : g.relations()) {
    std::printf("relation %s %s->%s nnz=%lld\n", r.name.c_str(), g.node_type(r.src).name.c_str(),
                g.node_type(r.dst).name.c_str(), static_cast<long long>(r.matrix.nnz()));
  }
  std::printf("splits train=%zu valid=%zu test=%zu\n", g.splits().train.size(), g.splits().valid.size(),
              g.splits().test.size());
  return 0;
}

int cmd_compose(const GraphOptions& o, int order, const std::string& out_dir) {
  if (order < 1) throw ValidationError("--order must be >= 1");
  auto g = prepare_graph(load_dataset(o.data), false);
  auto sets = build_relation_sets(g, order, o.prune());
  fs::create_directories(out_dir);
  const auto& set = sets.back();
  std::FILE* summary = std::fopen((fs::path(out_dir) / "summary.tsv").string().c_str(), "w");
  if (!summary) throw ValidationError("cannot write into " + out_dir);
  std::fputs("name\tnnz\tdensity\n", summary);
  std::printf("name\tnnz\tdensity\n");
  for (const auto& mem : set) {
    const auto name = mem.relation.name(g);
    std::FILE* f = std::fopen((fs::path(out_dir) / ("edges_" + name + ".tsv")).string().c_str(), "w");
    if (!f) throw ValidationError("cannot write edges for " + name);
    for (const auto& t : mem.matrix.triples()) {
      std::fprintf(f, "%lld\t%lld\t%.17g\n", static_cast<long long>(t.row), static_cast<long long>(t.col),
                   t.weight);
    }
    std::fclose(f);
    std::fprintf(summary, "%s\t%lld\t%.6g\n", name.c_str(), static_cast<long long>(mem.matrix.nnz()),
                 mem.matrix.density());
    std::printf("%s\t%lld\t%.6g\n", name.c_str(), static_cast<long long>(mem.matrix.nnz()), mem.matrix.density());
  }
  std::fclose(summary);
  return 0;
}

struct TrainArgs {
  GraphOptions graph;
  std::string out = "run";
  ModelConfig model;
  TrainConfig train;
  std::string fanouts = "25,20";
  std::string mode = "transductive";
  std::string activation = "relu";
  bool no_proximity = false;
  int epochs = 200;
};

int cmd_train(TrainArgs& a) {
  a.train.fanouts = parse_fanouts(a.fanouts);
  a.train.mode = parse_mode(a.mode);
  a.train.use_proximity = !a.no_proximity;
  a.train.epochs_max = std::max(a.epochs, 1);
  a.model.activation = parse_activation(a.activation);
  a.model.seed = a.train.seed;
  a.train.neg.seed = a.train.seed;
  a.train.validate(a.model.layers);

  auto g = prepare_graph(load_dataset(a.graph.data), a.graph.normalize);
  const auto rule = a.graph.prune();
  auto sets = build_relation_sets(g, a.model.layers, rule);
  LatteModel model(g, sets, a.model);

  const fs::path out(a.out);
  fs::create_directories(out);
  const auto ckpt = out / "checkpoint.json";
  const auto log = out / "train_log.csv";
  const auto fp = hex64(fingerprint(g));
  json manifest = {
      {"command", "train"},
      {"dataset", fs::absolute(a.graph.data).string()},
      {"dataset_fingerprint", fp},
      {"seeds", {{"model", a.model.seed}, {"training", a.train.seed}, {"negatives", a.train.neg.seed}}},
      {"model",
       {{"layers", a.model.layers},
        {"dim", a.model.dim},
        {"head_hidden", a.model.head_hidden > 0 ? a.model.head_hidden : a.model.dim},
        {"dropout", a.model.dropout},
        {"activation", activation_name(a.model.activation)},
        {"parameters", model.parameter_count()}}},
      {"training",
       {{"lr", a.train.lr},
        {"batch", a.train.batch_size},
        {"patience", a.train.patience},
        {"weight_decay", a.train.weight_decay},
        {"epochs_max", a.epochs},
        {"mode", mode_name(a.train.mode)},
        {"use_proximity", a.train.use_proximity},
        {"neg_ratio", a.train.neg.ratio},
        {"fanouts", a.train.fanouts},
        {"normalize", a.graph.normalize},
        {"prune_epsilon", a.graph.prune_epsilon},
        {"prune_top_k", a.graph.prune_top_k}}},
      {"threads", kernels::max_threads()},
      {"artifacts",
       {{"manifest", (out / "manifest.json").string()},
        {"checkpoint", ckpt.string()},
        {"train_log", log.string()}}}};
  {
    std::ofstream mf(out / "manifest.json");
    mf << manifest.dump(2) << "\n";
  }

  std::map<std::string, std::string> meta{{"dataset_fingerprint", fp},
                                          {"normalize", a.graph.normalize ? "1" : "0"},
                                          {"prune_epsilon", json(a.graph.prune_epsilon).dump()},
                                          {"prune_top_k", std::to_string(a.graph.prune_top_k)},
                                          {"mode", mode_name(a.train.mode)}};
  TrainHistory history;
  if (a.epochs > 0) {
    history = train(model, g, a.train, rule, [](const EpochRecord& r) {
      std::fprintf(stderr, "epoch %d train_loss %.6g val_loss %.6g val_macro_f1 %.4f\n", r.epoch,
                   r.train_loss, r.val_loss, r.val_macro_f1);
    });
    if (history.negatives_truncated) {
      std::fprintf(stderr, "warning: some relations were too dense for the requested negatives\n");
    }
  }
  meta["best_epoch"] = std::to_string(history.best_epoch);
  model.save(ckpt, meta);
  write_train_log(history, log);
  std::printf("epochs %zu best_epoch %d checkpoint %s\n", history.epochs.size(), history.best_epoch,
              ckpt.string().c_str());
  return 0;
}

int cmd_eval(const std::string& data, const std::string& checkpoint, const std::string& split) {
  std::map<std::string, std::string> meta;
  std::optional<LatteModel> model;
  auto loaded = load_checkpointed(data, checkpoint, meta, model);
  const auto& s = loaded.graph.splits();
  const std::vector<std::int64_t>* nodes = nullptr;
  if (split == "test") nodes = &s.test;
  else if (split == "valid") nodes = &s.valid;
  else if (split == "train") nodes = &s.train;
  else throw ValidationError("unknown split '" + split + "'");
  auto m = evaluate(*model, loaded.graph, loaded.sets, *nodes);
  std::vector<std::size_t> predicted(m.per_class.size(), 0);
  for (int y : m.predictions) ++predicted.at(static_cast<std::size_t>(y));
  json per_class = json::array();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto& pc = m.per_class[c];
    per_class.push_back({{"class", c},
                         {"precision", pc.precision},
                         {"recall", pc.recall},
                         {"f1", pc.f1},
                         {"support", pc.support},
                         {"predicted", predicted[c]}});
  }
  json out = {{"macro_f1", m.macro_f1}, {"per_class", per_class}, {"n_test", m.n}};
  std::printf("%s\n", out.dump(2).c_str());
  return 0;
}

int cmd_interpret(const std::string& data, const std::string& checkpoint, const std::string& out_dir,
                  bool svg, bool unweighted, bool dump_alpha) {
  std::map<std::string, std::string> meta;
  std::optional<LatteModel> model;
  auto loaded = load_checkpointed(data, checkpoint, meta, model);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  auto report = relation_weight_summary(*model, loaded.graph, loaded.sets);
  write_attention_summary(report, out / "attention_summary.csv");
  write_correlation(weight_degree_correlation(*model, loaded.graph, loaded.sets, !unweighted),
                    out / "correlation.csv");
  if (svg) write_summary_svg(report, out / "attention_summary.svg");
  if (dump_alpha) {
    auto view = full_view(loaded.graph, loaded.sets);
    Tape tape;
    auto fwd = model->forward(tape, loaded.graph, view, {});
    std::FILE* f = std::fopen((out / "alpha.tsv").string().c_str(), "w");
    if (!f) throw ValidationError("cannot write alpha.tsv");
    std::fputs("layer\trelation\tsrc\tdst\talpha\n", f);
    for (std::size_t l = 0; l < fwd.layers.size(); ++l) {
      for (std::size_t r = 0; r < loaded.sets[l].size(); ++r) {
        const auto& alpha = fwd.layers[l].alpha[r];
        if (!alpha.defined()) continue;
        const auto name = loaded.sets[l][r].relation.name(loaded.graph);
        const auto& e = view.edges[l][r];
        for (std::size_t k = 0; k < e.size(); ++k) {
          std::fprintf(f, "%zu\t%s\t%lld\t%lld\t%.10g\n", l + 1, name.c_str(), static_cast<long long>(e.src[k]),
                       static_cast<long long>(e.dst[k]), alpha.value()[k]);
        }
      }
    }
    std::fclose(f);
  }
  for (const auto& e : report.entries) {
    std::printf("layer %d %-10s mean %.4f std %.4f\n", e.layer, e.name.c_str(), e.mean_beta, e.std_beta);
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double eps, double tol) {
  auto r = gradcheck_end_to_end(seed, eps);
  std::printf("max_rel_error %.17g\nentries %zu\nworst param %zu entry %zu analytic %.17g numeric %.17g\n",
              r.max_rel_error, r.entries_checked, r.param, r.entry, r.analytic, r.numeric);
  if (!(r.max_rel_error < tol)) {
    std::fprintf(stderr, "gradcheck failed: %.3g >= %.3g\n", r.max_rel_error, tol);
    return kExitNumerical;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();
  CLI::App app{"Layer-stacked attention embeddings for heterogeneous networks"};
  app.require_subcommand(1);

  GraphOptions ingest_opt;
  auto* ingest = app.add_subcommand("ingest", "Validate a dataset directory");
  ingest->add_option("--data", ingest_opt.data, "Dataset directory")->required();

  SynthConfig sc;
  std::string synth_out, rule = "first";
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--rule", rule, "Planted rule: first|second")->check(CLI::IsMember({"first", "second"}));
  synth->add_option("--n-target", sc.n_target);
  synth->add_option("--n-aux", sc.n_aux);
  synth->add_option("--n-noise", sc.n_noise);
  synth->add_option("--feature-dim", sc.feature_dim);
  synth->add_option("--classes", sc.num_classes);
  synth->add_option("--aux-degree", sc.aux_per_target);
  synth->add_option("--noise-degree", sc.noise_per_target);
  synth->add_option("--skew", sc.degree_skew);
  synth->add_option("--feature-noise", sc.feature_noise);
  synth->add_option("--seed", synth_seed);
  bool noise_unattributed = false;
  synth->add_flag("--noise-unattributed", noise_unattributed);

  GraphOptions compose_opt;
  int order = 2;
  std::string compose_out = "composed";
  auto* compose = app.add_subcommand("compose", "Dump the order-t meta relations");
  add_graph_options(compose, compose_opt);
  compose->add_option("--order", order, "Order t");
  compose->add_option("--out", compose_out, "Output directory");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_graph_options(train_cmd, ta.graph);
  train_cmd->add_option("--out", ta.out, "Run directory");
  train_cmd->add_option("--dim", ta.model.dim, "Embedding width F per layer");
  train_cmd->add_option("--layers", ta.model.layers, "Number of layers T");
  train_cmd->add_option("--head-hidden", ta.model.head_hidden, "Classifier hidden width (0: dim)");
  train_cmd->add_option("--activation", ta.activation, "relu|sigmoid|identity");
  train_cmd->add_option("--dropout", ta.model.dropout);
  train_cmd->add_option("--lr", ta.train.lr);
  train_cmd->add_option("--batch", ta.train.batch_size);
  train_cmd->add_option("--patience", ta.train.patience);
  train_cmd->add_option("--weight-decay", ta.train.weight_decay);
  train_cmd->add_option("--neg-ratio", ta.train.neg.ratio);
  train_cmd->add_option("--fanouts", ta.fanouts, "Comma list, one per layer; <= 0 keeps all");
  train_cmd->add_option("--epochs", ta.epochs, "Epoch cap; 0 writes the untrained model");
  train_cmd->add_option("--mode", ta.mode, "transductive|inductive");
  train_cmd->add_option("--seed", ta.train.seed);
  train_cmd->add_flag("--no-proximity", ta.no_proximity, "Classification loss only");
  train_cmd->add_flag("--normalize", ta.graph.normalize, "Scale feature rows to unit L2 norm");

  std::string eval_data, eval_ckpt, eval_split = "test";
  auto* eval = app.add_subcommand("eval", "Macro-F1 of a checkpoint as JSON");
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--split", eval_split, "test|valid|train");

  std::string int_data, int_ckpt, int_out = "interpret";
  bool int_svg = false, int_unweighted = false, int_alpha = false;
  auto* interp = app.add_subcommand("interpret", "Relation-weight reports");
  interp->add_option("--data", int_data)->required();
  interp->add_option("--checkpoint", int_ckpt)->required();
  interp->add_option("--out", int_out);
  interp->add_flag("--svg", int_svg, "Also write attention_summary.svg");
  interp->add_flag("--unweighted-degree", int_unweighted);
  interp->add_flag("--dump-alpha", int_alpha, "Write per-link attention coefficients");

  std::uint64_t gc_seed = 1;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "End-to-end finite-difference check");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--eps", gc_eps);
  gradcheck->add_option("--tol", gc_tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_opt);
    if (*synth) {
      sc.rule = rule == "second" ? PlantedRule::kSecondOrder : PlantedRule::kFirstOrder;
      sc.noise_attributed = !noise_unattributed;
      write_dataset(synth_generate(sc, synth_seed), synth_out);
      return 0;
    }
    if (*compose) return cmd_compose(compose_opt, order, compose_out);
    if (*train_cmd) return cmd_train(ta);
    if (*eval) return cmd_eval(eval_data, eval_ckpt, eval_split);
    if (*interp) return cmd_interpret(int_data, int_ckpt, int_out, int_svg, int_unweighted, int_alpha);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_eps, gc_tol);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
