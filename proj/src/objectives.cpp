#include "latte/objectives.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "latte/error.hpp"

namespace latte {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr double kProbFloor = 1e-12;

}  // namespace

std::uint64_t negative_stream(std::uint64_t seed, std::uint64_t relation, std::uint64_t batch) {
  return splitmix(splitmix(splitmix(seed) ^ relation) ^ batch);
}

NegativeSample sample_negatives(const SparseBiadj& relation, std::span<const std::int64_t> src_nodes,
                                std::span<const std::int64_t> dst_nodes, std::size_t n_pos,
                                const NegSampleConfig& cfg, std::uint64_t stream) {
  if (!(cfg.ratio >= 0.0)) throw ValidationError("negative ratio must be >= 0");
  NegativeSample out;
  const auto want = static_cast<std::size_t>(std::llround(cfg.ratio * static_cast<double>(n_pos)));
  if (want == 0) return out;
  if (src_nodes.empty() || dst_nodes.empty()) {
    out.truncated = true;
    return out;
  }
  const auto pairs = static_cast<double>(src_nodes.size()) * static_cast<double>(dst_nodes.size());
  if (src_nodes.size() == static_cast<std::size_t>(relation.n_rows()) &&
      dst_nodes.size() == static_cast<std::size_t>(relation.n_cols()) &&
      static_cast<double>(relation.nnz()) >= pairs) {
    out.truncated = true;
    return out;
  }
  std::mt19937_64 rng(negative_stream(cfg.seed, stream, 0));
  std::uniform_int_distribution<std::size_t> pick_src(0, src_nodes.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_dst(0, dst_nodes.size() - 1);
  const std::size_t budget = std::max<std::size_t>(100, 20 * want);
  out.src.reserve(want);
  out.dst.reserve(want);
  for (std::size_t attempt = 0; attempt < budget && out.size() < want; ++attempt) {
    const auto i = pick_src(rng);
    const auto k = pick_dst(rng);
    if (relation.contains(src_nodes[i], dst_nodes[k])) continue;
    out.src.push_back(static_cast<std::int64_t>(i));
    out.dst.push_back(static_cast<std::int64_t>(k));
  }
  out.truncated = out.size() < want;
  return out;
}

NegativeSample sample_negatives(const SparseBiadj& relation, std::size_t n_pos,
                                const NegSampleConfig& cfg, std::uint64_t stream) {
  std::vector<std::int64_t> rows(static_cast<std::size_t>(relation.n_rows()));
  std::vector<std::int64_t> cols(static_cast<std::size_t>(relation.n_cols()));
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  return sample_negatives(relation, rows, cols, n_pos, cfg, stream);
}

Tensor nce_loss(Tape& tape, const Tensor& pos_scores, std::span<const double> pos_weights,
                const Tensor& neg_scores) {
  const bool has_pos = pos_scores.defined() && pos_scores.rows() > 0;
  const bool has_neg = neg_scores.defined() && neg_scores.rows() > 0;
  Tensor loss = Tensor::constant(Matrix(1, 1));
  if (has_pos) {
    if (pos_scores.cols() != 1 || pos_weights.size() != pos_scores.rows()) {
      throw ValidationError("nce_loss: one weight per positive score required");
    }
    Tensor a = Tensor::constant(Matrix(1, pos_weights.size(),
                                       std::vector<double>(pos_weights.begin(), pos_weights.end())));
    auto fit = ops::matmul(tape, a, ops::log_sigmoid(tape, pos_scores));
    loss = ops::scale(tape, fit, -1.0 / static_cast<double>(pos_scores.rows()));
  }
  if (has_neg) {
    auto miss = ops::reduce_sum(tape, ops::log_sigmoid(tape, ops::scale(tape, neg_scores, -1.0)));
    auto term = ops::scale(tape, miss, -1.0 / static_cast<double>(neg_scores.rows()));
    loss = has_pos ? ops::add(tape, loss, term) : term;
  }
  return loss;
}

Tensor cross_entropy(Tape& tape, const Tensor& probs, std::span<const int> labels, bool* clamped) {
  const auto n = probs.rows();
  const auto G = probs.cols();
  if (labels.size() != n) throw ValidationError("cross_entropy: one label per row required");
  if (clamped) *clamped = false;
  if (n == 0) return Tensor::constant(Matrix(1, 1));
  std::vector<std::int64_t> at(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= G) {
      throw ValidationError("cross_entropy: label out of range");
    }
    at[i] = static_cast<std::int64_t>(i * G) + labels[i];
    if (clamped && probs.value()[static_cast<std::size_t>(at[i])] < kProbFloor) *clamped = true;
  }
  auto truth = ops::gather_rows(tape, ops::reshape(tape, probs, n * G, 1), at);
  return ops::scale(tape, ops::reduce_sum(tape, ops::log(tape, truth, kProbFloor)), -1.0);
}

LossBreakdown total_loss(Tape& tape, const LatteModel& model, const HetGraph& g,
                         const std::vector<RelationSet>& sets, const GraphView& view,
                         std::span<const std::int64_t> labeled, const LossOptions& opt) {
  LossBreakdown out;
  out.forward = model.forward(tape, g, view, opt.forward);
  const auto target = g.target_type();

  std::vector<int> labels;
  labels.reserve(labeled.size());
  for (auto local : labeled) {
    const auto id = view.nodes[target].at(static_cast<std::size_t>(local));
    const int y = g.labels().at(static_cast<std::size_t>(id));
    if (y == kNoLabel) throw ValidationError("total_loss: unlabeled node in the supervised set");
    labels.push_back(y);
  }
  auto rows = ops::gather_rows(tape, out.forward.embedding[target], labeled);
  out.probs = model.classify(tape, rows);
  out.cross_entropy = cross_entropy(tape, out.probs, labels, &out.probability_clamped);
  out.total = out.cross_entropy;

  const auto nan = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t stream = 0;
  for (std::size_t l = 0; l < sets.size(); ++l) {
    out.proximity.emplace_back(sets[l].size(), nan);
    if (!opt.use_proximity) continue;
    const auto& state = out.forward.layers[l];
    const auto& kernel = model.layer(static_cast<int>(l + 1)).kernel;
    for (std::size_t r = 0; r < sets[l].size(); ++r, ++stream) {
      const auto& edges = view.edges[l][r];
      if (edges.empty()) continue;
      const auto& member = sets[l][r];
      const auto m = member.relation.source();
      const auto p = member.relation.target();
      auto neg = sample_negatives(member.matrix, view.nodes[m], view.nodes[p], edges.size(), opt.neg,
                                  negative_stream(opt.neg.seed, stream, opt.batch_index));
      out.negatives_truncated = out.negatives_truncated || neg.truncated;
      Tensor neg_scores;
      if (neg.size() > 0) {
        neg_scores = attention_scores(tape, state.source_context[m], state.target_context[p],
                                      kernel[r], neg.src, neg.dst);
      }
      auto term = nce_loss(tape, state.scores[r], edges.weight, neg_scores);
      out.proximity[l][r] = term.item();
      out.total = ops::add(tape, out.total, term);
    }
  }
  return out;
}

}  // namespace latte
