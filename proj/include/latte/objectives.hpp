#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "latte/model.hpp"

namespace latte {

struct NegSampleConfig {
  /// Negatives per positive link.
  double ratio = 5.0;
  std::uint64_t seed = 0;
};

/// Sampled non-links as positions into the candidate node lists.
struct NegativeSample {
  std::vector<std::int64_t> src;
  std::vector<std::int64_t> dst;
  /// Set when fewer than round(ratio * n_pos) pairs could be found.
  bool truncated = false;

  std::size_t size() const { return src.size(); }
};

/// Seed for one (relation, batch) stream of negatives.
std::uint64_t negative_stream(std::uint64_t seed, std::uint64_t relation, std::uint64_t batch);

/// round(ratio * n_pos) pairs drawn uniformly from src_nodes x dst_nodes,
/// rejecting pairs that are entries of relation (rows and columns are global
/// ids). Gives up after max(100, 20K) draws and returns what it found.
NegativeSample sample_negatives(const SparseBiadj& relation, std::span<const std::int64_t> src_nodes,
                                std::span<const std::int64_t> dst_nodes, std::size_t n_pos,
                                const NegSampleConfig& cfg, std::uint64_t stream);

/// Same over every source and target node of the relation.
NegativeSample sample_negatives(const SparseBiadj& relation, std::size_t n_pos,
                                const NegSampleConfig& cfg, std::uint64_t stream = 0);

/// -(1/|A|) sum a * log sigmoid(e_pos) - (1/K) sum log sigmoid(-e_neg).
/// Either term is omitted when it has no rows.
Tensor nce_loss(Tape& tape, const Tensor& pos_scores, std::span<const double> pos_weights,
                const Tensor& neg_scores);

/// -sum_i log probs[i, labels[i]], with probabilities floored at 1e-12.
/// clamped (optional) reports whether the floor was hit.
Tensor cross_entropy(Tape& tape, const Tensor& probs, std::span<const int> labels,
                     bool* clamped = nullptr);

struct LossOptions {
  bool use_proximity = false;
  NegSampleConfig neg;
  std::uint64_t batch_index = 0;
  ForwardOptions forward;
};

struct LossBreakdown {
  Tensor total;
  Tensor cross_entropy;
  /// proximity[t-1][r]: NCE loss of member r of A^t, or NaN when the view has
  /// no links of r (or proximity is off).
  std::vector<std::vector<double>> proximity;
  bool negatives_truncated = false;
  bool probability_clamped = false;
  ForwardResult forward;
  /// Class probabilities of the labeled rows.
  Tensor probs;
};

/// CE over the labeled view rows of the target type plus, with proximity on,
/// the NCE loss of every relation of every order on the view's links.
/// labeled holds local row indices of the target type; negatives are drawn
/// among the view's nodes and rejected against the sets' matrices.
LossBreakdown total_loss(Tape& tape, const LatteModel& model, const HetGraph& g,
                         const std::vector<RelationSet>& sets, const GraphView& view,
                         std::span<const std::int64_t> labeled, const LossOptions& opt);

}  // namespace latte
