#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "latte/error.hpp"
#include "latte/tensor.hpp"

using namespace latte;
using ops::Trans;

namespace {

Tensor one() { return Tensor::constant(Matrix(1, 1, 1.0)); }

double entropy(const Matrix& p) {
  double h = 0.0;
  for (auto v : p.data()) h -= v > 0 ? v * std::log(v) : 0.0;
  return h;
}

}  // namespace

TEST(SegmentSoftmax, ClosedForm) {
  Tape tape;
  auto v = Tensor::constant(Matrix{{1}, {0}});
  std::vector<std::int64_t> seg{0, 0};
  auto p = ops::segment_softmax(tape, v, seg, Tensor::constant(Matrix(1, 1, 2.0)));
  EXPECT_NEAR(p.value()[0], std::exp(2.0) / (std::exp(2.0) + 1.0), 1e-15);
  EXPECT_NEAR(p.value()[0], 0.8808, 1e-4);
  EXPECT_NEAR(p.value()[1], 0.1192, 1e-4);
}

TEST(SegmentSoftmax, SingletonIsOne) {
  Tape tape;
  std::vector<std::int64_t> seg{0, 1, 1};
  auto p = ops::segment_softmax(tape, Tensor::constant(Matrix{{-3}, {5}, {5}}), seg, one());
  EXPECT_DOUBLE_EQ(p.value()[0], 1.0);
  EXPECT_DOUBLE_EQ(p.value()[1], 0.5);
}

TEST(SegmentSoftmax, ShiftInvariance) {
  std::mt19937_64 rng(1);
  std::vector<std::int64_t> seg{0, 0, 0, 1, 1, 2};
  auto v = fixture::random_matrix(6, 1, rng, 3.0);
  auto shifted = v;
  const double c[] = {5.0, -2.0, 100.0};
  for (std::size_t i = 0; i < 6; ++i) shifted[i] += c[seg[i]];
  Tape tape;
  auto a = ops::segment_softmax(tape, Tensor::constant(v), seg, one());
  auto b = ops::segment_softmax(tape, Tensor::constant(shifted), seg, one());
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(a.value()[i], b.value()[i], 1e-12);
}

TEST(SegmentSoftmax, EntropyFallsWithTemperature) {
  std::vector<std::int64_t> seg{0, 0, 0, 0};
  Matrix v{{0.3}, {-1.2}, {0.9}, {0.1}};
  double last = std::numeric_limits<double>::infinity();
  for (double tau : {0.5, 1.0, 2.0, 4.0}) {
    Tape tape;
    auto p = ops::segment_softmax(tape, Tensor::constant(v), seg, Tensor::constant(Matrix(1, 1, tau)));
    const double h = entropy(p.value());
    EXPECT_LT(h, last);
    last = h;
  }
}

TEST(SegmentSoftmax, Errors) {
  Tape tape;
  std::vector<std::int64_t> seg{0, 2};
  EXPECT_THROW(ops::segment_softmax(tape, Tensor::constant(Matrix{{1}, {2}}), seg,
                                    Tensor::constant(Matrix(3, 1, 1.0))),
               ValidationError);
  std::vector<std::int64_t> none;
  EXPECT_THROW(ops::segment_softmax(tape, Tensor::constant(Matrix(0, 1)), none, one()), ValidationError);
  std::vector<std::int64_t> unsorted{1, 0};
  EXPECT_THROW(ops::segment_softmax(tape, Tensor::constant(Matrix{{1}, {2}}), unsorted, one()),
               ValidationError);
}

TEST(Backward, MatmulExample) {
  Tape tape;
  auto x = Tensor::parameter(Matrix{{1, 2}});
  auto y = Tensor::constant(Matrix{{3}, {4}});
  auto z = ops::matmul(tape, x, y);
  EXPECT_EQ(z.item(), 11.0);
  tape.backward(ops::reduce_sum(tape, z));
  EXPECT_EQ(x.grad(), (Matrix{{3, 4}}));
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  auto x = Tensor::parameter(Matrix(2, 3, 0.7));
  tape.backward(ops::reduce_sum(tape, x));
  EXPECT_EQ(x.grad(), Matrix(2, 3, 1.0));
}

TEST(Backward, SigmoidAtZero) {
  Tape tape;
  auto x = Tensor::parameter(Matrix(2, 2, 0.0));
  tape.backward(ops::reduce_sum(tape, ops::sigmoid(tape, x)));
  for (auto g : x.grad().data()) EXPECT_DOUBLE_EQ(g, 0.25);
}

TEST(Backward, FanOutAccumulates) {
  Tape tape;
  auto x = Tensor::parameter(Matrix(1, 1, 2.0));
  auto y = ops::add(tape, ops::scale(tape, x, 3.0), ops::exp(tape, x));
  tape.backward(y);
  EXPECT_NEAR(x.grad()[0], 3.0 + std::exp(2.0), 1e-12);
}

TEST(Backward, NonScalarLossRejected) {
  Tape tape;
  auto x = Tensor::parameter(Matrix(2, 1, 1.0));
  EXPECT_THROW(tape.backward(ops::relu(tape, x)), ValidationError);
}

TEST(Backward, Linearity) {
  std::mt19937_64 rng(3);
  auto w = Tensor::parameter(fixture::random_matrix(3, 4, rng));
  auto f = [&](Tape& t) { return ops::reduce_sum(t, ops::sigmoid(t, w)); };
  auto g = [&](Tape& t) { return ops::reduce_sum(t, ops::exp(t, ops::scale(t, w, 0.3))); };
  auto grad_of = [&](auto fn) {
    w.zero_grad();
    Tape t;
    t.backward(fn(t));
    return w.grad();
  };
  auto gf = grad_of(f);
  auto gg = grad_of(g);
  auto gc = grad_of([&](Tape& t) { return ops::add(t, ops::scale(t, f(t), 2.0), ops::scale(t, g(t), -0.5)); });
  for (std::size_t i = 0; i < gc.size(); ++i) EXPECT_NEAR(gc[i], 2.0 * gf[i] - 0.5 * gg[i], 1e-12);
}

TEST(GradCheck, Quadratic) {
  auto w = Tensor::parameter(Matrix{{0.3}, {-1.2}, {2.0}});
  std::vector<Tensor> params{w};
  auto r = grad_check([&](Tape& t) { return ops::matmul(t, w, w, Trans::kYes, Trans::kNo); }, params, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_EQ(r.entries_checked, 3u);
}

TEST(GradCheck, RandomThreeLayerComposite) {
  std::mt19937_64 rng(7);
  auto x = Tensor::constant(fixture::random_matrix(5, 4, rng));
  auto w1 = Tensor::parameter(fixture::random_matrix(6, 4, rng, 0.5));
  auto b1 = Tensor::parameter(fixture::random_matrix(1, 6, rng, 0.5));
  auto w2 = Tensor::parameter(fixture::random_matrix(4, 6, rng, 0.5));
  auto w3 = Tensor::parameter(fixture::random_matrix(1, 4, rng, 0.5));
  auto tau = Tensor::parameter(Matrix(1, 1, 0.4));
  std::vector<std::int64_t> seg{0, 0, 1, 1, 1};
  std::vector<std::int64_t> pick{4, 0, 2, 2};
  std::vector<Tensor> params{w1, b1, w2, w3, tau};
  auto f = [&](Tape& t) {
    auto h1 = ops::sigmoid(t, ops::add(t, ops::matmul(t, x, w1, Trans::kNo, Trans::kYes), b1));
    auto h2 = ops::matmul(t, h1, w2, Trans::kNo, Trans::kYes);
    auto both = std::vector<Tensor>{h2, ops::exp(t, ops::scale(t, h2, 0.1))};
    auto wide = ops::concat_cols(t, both);
    auto back = ops::concat_rows(t, std::vector<Tensor>{ops::gather_rows(t, h2, pick), h2});
    auto score = ops::matmul(t, h2, w3, Trans::kNo, Trans::kYes);
    auto alpha = ops::segment_softmax(t, score, seg, ops::softplus(t, tau));
    auto agg = ops::segment_weighted_sum(t, h2, alpha, seg, 2);
    auto l = ops::add(t, ops::reduce_sum(t, ops::log_sigmoid(t, agg)),
                      ops::scale(t, ops::reduce_sum(t, ops::log(t, ops::sigmoid(t, wide))), 0.1));
    l = ops::add(t, l, ops::reduce_sum(t, ops::transpose(t, ops::reshape(t, back, 3, 12))));
    return ops::add(t, l, ops::reduce_sum(t, ops::relu(t, ops::scale(t, agg, 2.0))));
  };
  auto r = grad_check(f, params, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-6) << "param " << r.param << " entry " << r.entry;
}

TEST(GradCheck, CatchesAWrongGradient) {
  auto w = Tensor::parameter(Matrix{{0.5, -0.25}});
  std::vector<Tensor> params{w};
  auto f = [&](Tape& t) {
    Matrix v(1, 1, w.value()[0] * w.value()[0] + w.value()[1]);
    Tensor out(std::move(v), true);
    t.record([w, out]() {
      w.mutable_grad()[0] += out.grad()[0] * 3.0 * w.value()[0];
      w.mutable_grad()[1] += out.grad()[0];
    });
    return out;
  };
  EXPECT_GT(grad_check(f, params, 1e-5).max_rel_error, 1e-2);
}

TEST(GradCheck, NonFiniteIsNumericalError) {
  auto w = Tensor::parameter(Matrix(1, 1, 1000.0));
  std::vector<Tensor> params{w};
  EXPECT_THROW(grad_check([&](Tape& t) { return ops::exp(t, w); }, params, 1e-5), NumericalError);
}

TEST(Dropout, DeterministicAndIdentityAtZero) {
  std::mt19937_64 rng(2);
  auto x = Tensor::constant(fixture::random_matrix(20, 10, rng));
  Tape tape;
  auto a = ops::dropout(tape, x, 0.3, 42);
  auto b = ops::dropout(tape, x, 0.3, 42);
  auto c = ops::dropout(tape, x, 0.3, 43);
  EXPECT_EQ(a.value(), b.value());
  EXPECT_NE(a.value(), c.value());
  EXPECT_TRUE(ops::dropout(tape, x, 0.0, 42).same(x));
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.value().size(); ++i) {
    if (a.value()[i] == 0.0) {
      ++zeros;
    } else {
      EXPECT_NEAR(a.value()[i], x.value()[i] / 0.7, 1e-12);
    }
  }
  EXPECT_GT(zeros, 30u);
  EXPECT_LT(zeros, 90u);
}

TEST(Ops, ShapeMismatchesThrow) {
  Tape tape;
  auto a = Tensor::constant(Matrix(2, 3));
  EXPECT_THROW(ops::matmul(tape, a, a), ValidationError);
  EXPECT_THROW(ops::add(tape, a, Tensor::constant(Matrix(2, 2))), ValidationError);
  EXPECT_THROW(ops::reshape(tape, a, 4, 2), ValidationError);
  std::vector<std::int64_t> rows{5};
  EXPECT_THROW(ops::gather_rows(tape, a, rows), ValidationError);
}

TEST(Ops, BroadcastBiasGradient) {
  Tape tape;
  auto a = Tensor::parameter(Matrix(3, 2, 1.0));
  auto b = Tensor::parameter(Matrix(1, 2, 0.5));
  tape.backward(ops::reduce_sum(tape, ops::add(tape, a, b)));
  EXPECT_EQ(b.grad(), (Matrix{{3, 3}}));
}
