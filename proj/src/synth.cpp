#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "latte/error.hpp"
#include "latte/hetgraph.hpp"

namespace latte {

namespace {

int plurality(const std::vector<int>& counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

// Weighted sampling of k distinct items (Efraimidis-Spirakis keys).
std::vector<std::int64_t> weighted_distinct(std::mt19937_64& rng, const std::vector<double>& w,
                                            std::int64_t k) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<double, std::int64_t>> keys(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    keys[i] = {std::log(u) / w[i], static_cast<std::int64_t>(i)};
  }
  k = std::min<std::int64_t>(k, static_cast<std::int64_t>(w.size()));
  std::partial_sort(keys.begin(), keys.begin() + k, keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::int64_t> out;
  for (std::int64_t i = 0; i < k; ++i) out.push_back(keys[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

Matrix planted_features(std::mt19937_64& rng, const std::vector<int>& planted, int num_classes,
                        std::int64_t dim, double noise, const std::vector<double>* log_popularity) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(planted.size(), static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < planted.size(); ++i) {
    for (std::int64_t d = 0; d < dim; ++d) {
      if (d < num_classes) {
        x(i, d) = (planted[i] == d ? 1.0 : 0.0) + noise * gauss(rng);
      } else if (d == num_classes) {
        x(i, d) = (log_popularity ? (*log_popularity)[i] : 0.0) + noise * gauss(rng);
      } else {
        x(i, d) = gauss(rng);
      }
    }
  }
  return x;
}

}  // namespace

HetGraph synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  const int G = cfg.num_classes;
  if (cfg.n_target < 1 || cfg.n_aux < 1 || cfg.n_noise < 0) throw ValidationError("invalid node counts");
  if (G < 2) throw ValidationError("need at least two classes");
  if (cfg.feature_dim < G + 1) throw ValidationError("feature_dim must be at least num_classes + 1");
  if (cfg.aux_per_target < 1 || (cfg.n_noise > 0 && cfg.noise_per_target < 1)) {
    throw ValidationError("link counts must be positive");
  }
  if (cfg.train_frac < 0 || cfg.valid_frac < 0 || cfg.train_frac + cfg.valid_frac > 1.0) {
    throw ValidationError("invalid split fractions");
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cls(0, G - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<int> planted_p(static_cast<std::size_t>(cfg.n_target));
  std::vector<int> planted_a(static_cast<std::size_t>(cfg.n_aux));
  std::vector<int> planted_c(static_cast<std::size_t>(cfg.n_noise));
  for (auto& c : planted_p) c = cls(rng);
  for (auto& c : planted_a) c = cls(rng);
  for (auto& c : planted_c) c = cls(rng);

  std::vector<double> log_pop(planted_a.size());
  std::vector<double> pop(planted_a.size());
  for (std::size_t a = 0; a < pop.size(); ++a) {
    log_pop[a] = cfg.degree_skew * gauss(rng);
    pop[a] = std::exp(log_pop[a]);
  }

  std::vector<Triple> pa;
  std::vector<std::vector<std::int64_t>> aux_of(planted_p.size());
  std::uniform_int_distribution<int> aux_deg(1, 2 * cfg.aux_per_target - 1);
  for (std::int64_t p = 0; p < cfg.n_target; ++p) {
    aux_of[p] = weighted_distinct(rng, pop, aux_deg(rng));
    for (auto a : aux_of[p]) pa.push_back({p, a, 1.0});
  }

  std::vector<Triple> pc;
  if (cfg.n_noise > 0) {
    std::vector<double> flat(static_cast<std::size_t>(cfg.n_noise), 1.0);
    std::uniform_int_distribution<int> noise_deg(1, 2 * cfg.noise_per_target - 1);
    for (std::int64_t p = 0; p < cfg.n_target; ++p) {
      for (auto c : weighted_distinct(rng, flat, noise_deg(rng))) pc.push_back({p, c, 1.0});
    }
  }

  std::vector<int> labels(planted_p.size());
  if (cfg.rule == PlantedRule::kFirstOrder) {
    for (std::size_t p = 0; p < labels.size(); ++p) {
      std::vector<int> counts(G, 0);
      for (auto a : aux_of[p]) ++counts[planted_a[a]];
      labels[p] = plurality(counts);
    }
  } else {
    std::vector<std::vector<std::int64_t>> papers_of(planted_a.size());
    for (std::size_t p = 0; p < aux_of.size(); ++p) {
      for (auto a : aux_of[p]) papers_of[a].push_back(static_cast<std::int64_t>(p));
    }
    for (std::size_t p = 0; p < labels.size(); ++p) {
      std::vector<std::int64_t> hop2;
      for (auto a : aux_of[p]) {
        for (auto q : papers_of[a]) {
          if (q != static_cast<std::int64_t>(p)) hop2.push_back(q);
        }
      }
      std::sort(hop2.begin(), hop2.end());
      hop2.erase(std::unique(hop2.begin(), hop2.end()), hop2.end());
      if (hop2.empty()) {
        labels[p] = planted_p[p];
        continue;
      }
      std::vector<int> counts(G, 0);
      for (auto q : hop2) ++counts[planted_p[q]];
      labels[p] = plurality(counts);
    }
  }

  HetGraph::Parts parts;
  parts.node_types.push_back({"P", cfg.n_target, cfg.feature_dim});
  parts.node_types.push_back({"A", cfg.n_aux, cfg.feature_dim});
  parts.features.push_back(planted_features(rng, planted_p, G, cfg.feature_dim, cfg.feature_noise, nullptr));
  parts.features.push_back(planted_features(rng, planted_a, G, cfg.feature_dim, cfg.feature_noise, &log_pop));
  parts.relations.push_back({"PA", 0, 1, SparseBiadj::from_triples(cfg.n_target, cfg.n_aux, pa), false});
  if (cfg.n_noise > 0) {
    if (cfg.noise_attributed) {
      parts.node_types.push_back({"C", cfg.n_noise, cfg.feature_dim});
      parts.features.push_back(
          planted_features(rng, planted_c, G, cfg.feature_dim, cfg.feature_noise, nullptr));
    } else {
      parts.node_types.push_back({"C", cfg.n_noise, std::nullopt});
      parts.features.emplace_back();
    }
    parts.relations.push_back({"PC", 0, 2, SparseBiadj::from_triples(cfg.n_target, cfg.n_noise, pc), false});
  }
  parts.target_type = 0;
  parts.num_classes = G;
  parts.labels = labels;

  std::vector<std::int64_t> order(static_cast<std::size_t>(cfg.n_target));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(cfg.n_target);
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_frac * n));
  const auto n_valid = std::min(order.size() - n_train,
                                static_cast<std::size_t>(std::llround(cfg.valid_frac * n)));
  parts.splits.train.assign(order.begin(), order.begin() + n_train);
  parts.splits.valid.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  parts.splits.test.assign(order.begin() + n_train + n_valid, order.end());
  for (auto* s : {&parts.splits.train, &parts.splits.valid, &parts.splits.test}) {
    std::sort(s->begin(), s->end());
  }
  return HetGraph(std::move(parts));
}

}  // namespace latte
