#include <gtest/gtest.h>

#include <omp.h>

#include "fixtures.hpp"
#include "latte/kernels.hpp"

using namespace latte;
using kernels::Trans;

namespace {

class ThreadSweep : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    saved_ = kernels::max_threads();
    kernels::set_max_threads(GetParam());
  }
  void TearDown() override { kernels::set_max_threads(saved_); }
  int saved_ = 1;
};

}  // namespace

TEST_P(ThreadSweep, SpgemmMatchesSerialBitwise) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = fixture::random_sparse(60, 45, 0.1, rng);
    auto b = fixture::random_sparse(45, 33, 0.1, rng);
    std::vector<double> scale(45);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& s : scale) s = u(rng) < 0.2 ? 0.0 : u(rng);
    auto ref = kernels::serial::spgemm_scaled(a, scale, b);
    EXPECT_EQ(kernels::omp::spgemm_scaled(a, scale, b), ref);
    EXPECT_EQ(kernels::spgemm_scaled(a, scale, b), ref);
  }
}

TEST_P(ThreadSweep, GemmMatchesSerialBitwise) {
  std::mt19937_64 rng(2);
  for (auto ta : {Trans::kNo, Trans::kYes}) {
    for (auto tb : {Trans::kNo, Trans::kYes}) {
      for (bool acc : {false, true}) {
        auto a = ta == Trans::kNo ? fixture::random_matrix(37, 19, rng) : fixture::random_matrix(19, 37, rng);
        auto b = tb == Trans::kNo ? fixture::random_matrix(19, 23, rng) : fixture::random_matrix(23, 19, rng);
        auto c0 = fixture::random_matrix(37, 23, rng);
        auto ref = c0, got = c0, disp = c0;
        kernels::serial::gemm(a, ta, b, tb, ref, acc);
        kernels::omp::gemm(a, ta, b, tb, got, acc);
        kernels::gemm(a, ta, b, tb, disp, acc);
        EXPECT_EQ(got, ref);
        EXPECT_EQ(disp, ref);
      }
    }
  }
}

TEST_P(ThreadSweep, SegmentSumMatchesSerialBitwise) {
  std::mt19937_64 rng(3);
  auto values = fixture::random_matrix(200, 7, rng);
  std::vector<double> w(200);
  std::vector<std::int64_t> seg(200);
  std::uniform_int_distribution<int> step(0, 2);
  std::int64_t s = 0;
  for (std::size_t e = 0; e < 200; ++e) {
    s += step(rng);
    seg[e] = s;
    w[e] = 0.01 * static_cast<double>(e);
  }
  Matrix ref(static_cast<std::size_t>(s + 3), 7, 9.0), got = ref;
  kernels::serial::segment_weighted_sum(values, w, seg, ref);
  kernels::omp::segment_weighted_sum(values, w, seg, got);
  EXPECT_EQ(got, ref);
  EXPECT_EQ(ref(static_cast<std::size_t>(s + 2), 0), 9.0);
}

INSTANTIATE_TEST_SUITE_P(Threads, ThreadSweep, ::testing::Values(1, 2, 3, 4));

TEST(Kernels, GemmSmallExample) {
  Matrix a{{1, 2}};
  Matrix b{{3}, {4}};
  Matrix c(1, 1);
  kernels::gemm(a, Trans::kNo, b, Trans::kNo, c, false);
  EXPECT_EQ(c(0, 0), 11.0);
}

TEST(Kernels, ThreadCap) {
  const int saved = kernels::max_threads();
  kernels::set_max_threads(3);
  EXPECT_EQ(kernels::max_threads(), 3);
  kernels::set_max_threads(0);
  EXPECT_EQ(kernels::max_threads(), 1);
  setenv("LATTE_THREADS", "2", 1);
  kernels::configure_threads_from_env();
  EXPECT_EQ(kernels::max_threads(), 2);
  unsetenv("LATTE_THREADS");
  kernels::set_max_threads(saved);
}
