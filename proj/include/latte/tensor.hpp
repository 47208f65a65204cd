#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "latte/kernels.hpp"
#include "latte/matrix.hpp"

namespace latte {

/// Shared handle to a dense value plus, when it requires grad, a gradient
/// accumulator of the same shape. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }
  static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() const { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() const { return node_->grad; }
  void zero_grad();

  /// Value of a 1x1 tensor.
  double item() const;

  bool same(const Tensor& o) const { return node_ == o.node_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
};

/// Records the backward closure of every primitive whose inputs require grad.
/// Backward replays them in exact reverse order of recording.
class Tape {
 public:
  void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }
  std::size_t size() const { return ops_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and accumulates into every requires-grad
  /// tensor reached. Throws ValidationError for a non-1x1 loss.
  void backward(Tensor loss);

 private:
  std::vector<std::function<void()>> ops_;
};

namespace ops {

using kernels::Trans;

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b, Trans ta = Trans::kNo,
              Trans tb = Trans::kNo);
Tensor transpose(Tape& tape, const Tensor& a);
/// a + b with b either the same shape or a 1 x cols row vector.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
/// Vertical stack.
Tensor concat_rows(Tape& tape, std::span<const Tensor> parts);
/// Horizontal stack (row-wise concatenation of features).
Tensor concat_cols(Tape& tape, std::span<const Tensor> parts);

Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor relu(Tape& tape, const Tensor& a);
Tensor exp(Tape& tape, const Tensor& a);
/// log(max(a, floor)); the gradient is zero where the floor is active.
Tensor log(Tape& tape, const Tensor& a, double floor = 0.0);
/// Numerically stable log(sigmoid(a)).
Tensor log_sigmoid(Tape& tape, const Tensor& a);
Tensor softplus(Tape& tape, const Tensor& a);
Tensor scale(Tape& tape, const Tensor& a, double factor);

/// Inverted dropout: zeroes each entry with probability p and scales the rest
/// by 1/(1-p). The mask depends only on (p, seed, shape). p = 0 returns a.
Tensor dropout(Tape& tape, const Tensor& a, double p, std::uint64_t seed);

Tensor gather_rows(Tape& tape, const Tensor& a, std::span<const std::int64_t> rows);
Tensor reshape(Tape& tape, const Tensor& a, std::size_t rows, std::size_t cols);

/// Softmax of scale[s]·values within each run of equal segment ids. values is
/// n x 1; segment ids are sorted non-decreasing; scale is 1x1 (shared) or
/// n_segments x 1, in which case every segment id must occur.
Tensor segment_softmax(Tape& tape, const Tensor& values, std::span<const std::int64_t> segment,
                       const Tensor& scale);

/// out[s] = sum of weights[e]·values[e] over rows e of segment s; empty
/// segments give zero rows. values n x F, weights n x 1.
Tensor segment_weighted_sum(Tape& tape, const Tensor& values, const Tensor& weights,
                            std::span<const std::int64_t> segment, std::size_t n_segments);

/// Sum of all entries, 1x1.
Tensor reduce_sum(Tape& tape, const Tensor& a);

}  // namespace ops

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t param = 0;
  std::size_t entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares the tape gradient of f against central differences for every
/// entry of every parameter. Relative error per entry is
/// |analytic - numeric| / max(1e-12, |analytic| + |numeric|). Throws
/// NumericalError on non-finite values.
GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> params,
                           double eps);

}  // namespace latte
