#include "latte/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "latte/error.hpp"

namespace latte {

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad = Matrix(node_->value.rows(), node_->value.cols());
}

void Tensor::zero_grad() {
  if (node_->requires_grad) node_->grad.fill(0.0);
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ValidationError("item() on a non-scalar tensor");
  return node_->value[0];
}

void Tape::backward(Tensor loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ValidationError("backward requires a 1x1 loss, got " + std::to_string(loss.rows()) +
                          "x" + std::to_string(loss.cols()));
  }
  if (!loss.requires_grad()) return;
  loss.mutable_grad()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  ops_.clear();
}

namespace ops {

namespace {

bool any_grad(std::initializer_list<const Tensor*> ts) {
  for (const auto* t : ts) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void check_shape(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("shape mismatch in " + what);
}

// Shared body for elementwise maps: dfun(x, y) is dy/dx given input x and
// output y.
template <class F, class DF>
Tensor unary(Tape& tape, const Tensor& a, F fun, DF dfun) {
  Matrix v(a.rows(), a.cols());
  const auto& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = fun(x[i]);
  Tensor out(std::move(v), a.requires_grad());
  if (a.requires_grad()) {
    tape.record([a, out, dfun]() mutable {
      const auto& x = a.value();
      const auto& y = out.value();
      const auto& gy = out.grad();
      auto& gx = a.mutable_grad();
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += gy[i] * dfun(x[i], y[i]);
    });
  }
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_sorted(std::span<const std::int64_t> segment, const char* what) {
  for (std::size_t e = 0; e < segment.size(); ++e) {
    if (segment[e] < 0) throw ValidationError(std::string(what) + ": negative segment id");
    if (e > 0 && segment[e] < segment[e - 1]) {
      throw ValidationError(std::string(what) + ": segment ids not sorted");
    }
  }
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b, Trans ta, Trans tb) {
  Matrix c;
  kernels::gemm(a.value(), ta, b.value(), tb, c, false);
  Tensor out(std::move(c), any_grad({&a, &b}));
  if (out.requires_grad()) {
    tape.record([a, b, out, ta, tb]() mutable {
      const auto& gc = out.grad();
      const bool at = ta == Trans::kYes;
      const bool bt = tb == Trans::kYes;
      if (a.requires_grad()) {
        // dA = dC·op(B)^T, transposed back when A entered transposed.
        if (!at) {
          kernels::gemm(gc, Trans::kNo, b.value(), bt ? Trans::kNo : Trans::kYes, a.mutable_grad(), true);
        } else {
          kernels::gemm(b.value(), bt ? Trans::kYes : Trans::kNo, gc, Trans::kYes, a.mutable_grad(), true);
        }
      }
      if (b.requires_grad()) {
        // dB = op(A)^T·dC, transposed back when B entered transposed.
        if (!bt) {
          kernels::gemm(a.value(), at ? Trans::kNo : Trans::kYes, gc, Trans::kNo, b.mutable_grad(), true);
        } else {
          kernels::gemm(gc, Trans::kYes, a.value(), at ? Trans::kYes : Trans::kNo, b.mutable_grad(), true);
        }
      }
    });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& a) {
  const auto& x = a.value();
  Matrix v(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) v(j, i) = x(i, j);
  }
  Tensor out(std::move(v), a.requires_grad());
  if (a.requires_grad()) {
    tape.record([a, out]() mutable {
      const auto& g = out.grad();
      auto& ga = a.mutable_grad();
      for (std::size_t i = 0; i < ga.rows(); ++i) {
        for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(j, i);
      }
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const bool broadcast = !a.value().same_shape(b.value());
  check_shape(!broadcast || (b.rows() == 1 && b.cols() == a.cols()), "add");
  Matrix v = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < v.rows(); ++i) {
    auto row = v.row(i);
    auto brow = bv.row(broadcast ? 0 : i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += brow[j];
  }
  Tensor out(std::move(v), any_grad({&a, &b}));
  if (out.requires_grad()) {
    tape.record([a, b, out, broadcast]() mutable {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.mutable_grad();
        for (std::size_t i = 0; i < g.rows(); ++i) {
          auto grow = g.row(i);
          auto brow = gb.row(broadcast ? 0 : i);
          for (std::size_t j = 0; j < grow.size(); ++j) brow[j] += grow[j];
        }
      }
    });
  }
  return out;
}

Tensor concat_rows(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw ValidationError("concat_rows of nothing");
  const auto cols = parts.front().cols();
  std::size_t rows = 0;
  bool grad = false;
  for (const auto& p : parts) {
    check_shape(p.cols() == cols, "concat_rows");
    rows += p.rows();
    grad = grad || p.requires_grad();
  }
  Matrix v(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), v.data().begin() + offset * cols);
    offset += p.rows();
  }
  Tensor out(std::move(v), grad);
  if (grad) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    tape.record([inputs, out]() mutable {
      const auto& g = out.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        if (p.requires_grad()) {
          auto& gp = p.mutable_grad();
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset * g.cols() + i];
        }
        offset += p.rows();
      }
    });
  }
  return out;
}

Tensor concat_cols(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw ValidationError("concat_cols of nothing");
  const auto rows = parts.front().rows();
  std::size_t cols = 0;
  bool grad = false;
  for (const auto& p : parts) {
    check_shape(p.rows() == rows, "concat_cols");
    cols += p.cols();
    grad = grad || p.requires_grad();
  }
  Matrix v(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < rows; ++i) {
      auto src = p.value().row(i);
      std::copy(src.begin(), src.end(), v.row(i).begin() + offset);
    }
    offset += p.cols();
  }
  Tensor out(std::move(v), grad);
  if (grad) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    tape.record([inputs, out]() mutable {
      const auto& g = out.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        if (p.requires_grad()) {
          auto& gp = p.mutable_grad();
          for (std::size_t i = 0; i < gp.rows(); ++i) {
            auto src = g.row(i);
            auto dst = gp.row(i);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[offset + j];
          }
        }
        offset += p.cols();
      }
    });
  }
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary(tape, a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(Tape& tape, const Tensor& a, double floor) {
  return unary(
      tape, a, [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Tensor log_sigmoid(Tape& tape, const Tensor& a) {
  // log σ(x) = min(x, 0) - log1p(exp(-|x|))
  return unary(
      tape, a, [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return 1.0 - stable_sigmoid(x); });
}

Tensor softplus(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  return unary(
      tape, a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor dropout(Tape& tape, const Tensor& a, double p, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw ValidationError("dropout probability must be in [0, 1)");
  if (p == 0.0) return a;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  std::vector<double> mask(a.value().size());
  for (auto& m : mask) m = keep(rng) ? s : 0.0;
  Matrix v = a.value();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
  Tensor out(std::move(v), a.requires_grad());
  if (a.requires_grad()) {
    tape.record([a, out, mask = std::move(mask)]() mutable {
      const auto& g = out.grad();
      auto& ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
    });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& a, std::span<const std::int64_t> rows) {
  const auto cols = a.cols();
  Matrix v(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= a.rows()) {
      throw ValidationError("gather_rows index out of range");
    }
    auto src = a.value().row(static_cast<std::size_t>(rows[r]));
    std::copy(src.begin(), src.end(), v.row(r).begin());
  }
  Tensor out(std::move(v), a.requires_grad());
  if (a.requires_grad()) {
    std::vector<std::int64_t> idx(rows.begin(), rows.end());
    tape.record([a, out, idx = std::move(idx)]() mutable {
      const auto& g = out.grad();
      auto& ga = a.mutable_grad();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        auto src = g.row(r);
        auto dst = ga.row(static_cast<std::size_t>(idx[r]));
        for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& a, std::size_t rows, std::size_t cols) {
  check_shape(rows * cols == a.value().size(), "reshape");
  Tensor out(Matrix(rows, cols, a.value().data()), a.requires_grad());
  if (a.requires_grad()) {
    tape.record([a, out]() mutable {
      const auto& g = out.grad();
      auto& ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

Tensor segment_softmax(Tape& tape, const Tensor& values, std::span<const std::int64_t> segment,
                       const Tensor& scale) {
  const auto n = values.rows();
  if (values.cols() != 1) throw ValidationError("segment_softmax expects an n x 1 column");
  if (n == 0) throw ValidationError("segment_softmax: empty segment");
  if (segment.size() != n) throw ValidationError("segment_softmax: segment length mismatch");
  check_sorted(segment, "segment_softmax");
  const bool shared = scale.rows() == 1 && scale.cols() == 1;
  const auto n_segments = static_cast<std::size_t>(segment.back()) + 1;
  if (!shared) {
    if (scale.cols() != 1 || scale.rows() != n_segments) {
      throw ValidationError("segment_softmax: scale must be 1x1 or n_segments x 1");
    }
    std::vector<char> present(n_segments, 0);
    for (auto s : segment) present[static_cast<std::size_t>(s)] = 1;
    if (std::find(present.begin(), present.end(), 0) != present.end()) {
      throw ValidationError("segment_softmax: empty segment");
    }
  }
  auto scale_of = [&](std::int64_t s) { return scale.value()[shared ? 0 : static_cast<std::size_t>(s)]; };

  Matrix y(n, 1);
  const auto& v = values.value();
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start;
    while (end < n && segment[end] == segment[start]) ++end;
    const double s = scale_of(segment[start]);
    double mx = -std::numeric_limits<double>::infinity();
    for (auto e = start; e < end; ++e) mx = std::max(mx, s * v[e]);
    double total = 0.0;
    for (auto e = start; e < end; ++e) {
      y[e] = std::exp(s * v[e] - mx);
      total += y[e];
    }
    for (auto e = start; e < end; ++e) y[e] /= total;
    start = end;
  }
  Tensor out(std::move(y), any_grad({&values, &scale}));
  if (out.requires_grad()) {
    std::vector<std::int64_t> seg(segment.begin(), segment.end());
    tape.record([values, scale, out, seg = std::move(seg), shared]() mutable {
      const auto& y = out.value();
      const auto& gy = out.grad();
      const auto& v = values.value();
      const auto n = seg.size();
      std::size_t start = 0;
      while (start < n) {
        std::size_t end = start;
        while (end < n && seg[end] == seg[start]) ++end;
        const auto sidx = shared ? 0 : static_cast<std::size_t>(seg[start]);
        const double s = scale.value()[sidx];
        double dot = 0.0;
        for (auto e = start; e < end; ++e) dot += y[e] * gy[e];
        double gscale = 0.0;
        for (auto e = start; e < end; ++e) {
          const double dz = y[e] * (gy[e] - dot);
          if (values.requires_grad()) values.mutable_grad()[e] += s * dz;
          gscale += v[e] * dz;
        }
        if (scale.requires_grad()) scale.mutable_grad()[sidx] += gscale;
        start = end;
      }
    });
  }
  return out;
}

Tensor segment_weighted_sum(Tape& tape, const Tensor& values, const Tensor& weights,
                            std::span<const std::int64_t> segment, std::size_t n_segments) {
  if (weights.cols() != 1 || weights.rows() != values.rows() || segment.size() != values.rows()) {
    throw ValidationError("segment_weighted_sum: length mismatch");
  }
  check_sorted(segment, "segment_weighted_sum");
  if (!segment.empty() && static_cast<std::size_t>(segment.back()) >= n_segments) {
    throw ValidationError("segment_weighted_sum: segment id out of range");
  }
  Matrix v(n_segments, values.cols());
  kernels::segment_weighted_sum(values.value(), weights.value().data(), segment, v);
  Tensor out(std::move(v), any_grad({&values, &weights}));
  if (out.requires_grad()) {
    std::vector<std::int64_t> seg(segment.begin(), segment.end());
    tape.record([values, weights, out, seg = std::move(seg)]() mutable {
      const auto& g = out.grad();
      const auto& w = weights.value();
      const auto& x = values.value();
      for (std::size_t e = 0; e < seg.size(); ++e) {
        auto grow = g.row(static_cast<std::size_t>(seg[e]));
        if (values.requires_grad()) {
          auto dst = values.mutable_grad().row(e);
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w[e] * grow[j];
        }
        if (weights.requires_grad()) {
          auto xrow = x.row(e);
          double dot = 0.0;
          for (std::size_t j = 0; j < xrow.size(); ++j) dot += xrow[j] * grow[j];
          weights.mutable_grad()[e] += dot;
        }
      }
    });
  }
  return out;
}

Tensor reduce_sum(Tape& tape, const Tensor& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  Tensor out(Matrix(1, 1, s), a.requires_grad());
  if (a.requires_grad()) {
    tape.record([a, out]() mutable {
      const double g = out.grad()[0];
      auto& ga = a.mutable_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
  }
  return out;
}

}  // namespace ops

GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> params,
                           double eps) {
  if (!(eps > 0.0)) throw ValidationError("grad_check eps must be positive");
  for (auto& p : params) p.zero_grad();
  {
    Tape tape;
    auto loss = f(tape);
    if (!std::isfinite(loss.item())) throw NumericalError("grad_check: non-finite loss");
    tape.backward(loss);
  }
  std::vector<Matrix> analytic;
  for (const auto& p : params) analytic.push_back(p.grad());

  auto eval = [&]() {
    Tape tape;
    const double v = f(tape).item();
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite loss under perturbation");
    return v;
  };

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& value = params[pi].mutable_value();
    for (std::size_t e = 0; e < value.size(); ++e) {
      const double saved = value[e];
      value[e] = saved + eps;
      const double up = eval();
      value[e] = saved - eps;
      const double down = eval();
      value[e] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi][e];
      if (!std::isfinite(a)) throw NumericalError("grad_check: non-finite analytic gradient");
      const double rel = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
      ++res.entries_checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.param = pi;
        res.entry = e;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  for (auto& p : params) p.zero_grad();
  return res;
}

}  // namespace latte
