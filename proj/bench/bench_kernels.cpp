// Serial reference vs OpenMP kernels. Run with LATTE_THREADS=<n> to cap the
// OpenMP side; the serial variants ignore it.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "latte/kernels.hpp"

namespace {

using namespace latte;

SparseBiadj random_sparse(std::int64_t rows, std::int64_t cols, int per_row, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> col(0, cols - 1);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  std::vector<Triple> t;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (int k = 0; k < per_row; ++k) t.push_back({r, col(rng), w(rng)});
  }
  return SparseBiadj::from_triples(rows, cols, t);
}

Matrix random_dense(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

template <SparseBiadj (*Fn)(const SparseBiadj&, std::span<const double>, const SparseBiadj&)>
void BM_Spgemm(benchmark::State& state) {
  const auto n = state.range(0);
  auto a = random_sparse(n, n / 2, 8, 1);
  auto b = random_sparse(n / 2, n, 8, 2);
  std::vector<double> scale(static_cast<std::size_t>(n / 2), 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, scale, b));
}

template <void (*Fn)(const Matrix&, kernels::Trans, const Matrix&, kernels::Trans, Matrix&, bool)>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_dense(n, 128, 3);
  auto b = random_dense(128, 128, 4);
  Matrix c(n, 128);
  for (auto _ : state) {
    Fn(a, kernels::Trans::kNo, b, kernels::Trans::kYes, c, false);
    benchmark::DoNotOptimize(c.data().data());
  }
}

template <void (*Fn)(const Matrix&, std::span<const double>, std::span<const std::int64_t>, Matrix&)>
void BM_SegmentSum(benchmark::State& state) {
  const auto edges = static_cast<std::size_t>(state.range(0));
  const std::size_t segments = edges / 10;
  auto values = random_dense(edges, 128, 5);
  std::vector<double> weights(edges, 0.1);
  std::vector<std::int64_t> seg(edges);
  for (std::size_t e = 0; e < edges; ++e) seg[e] = static_cast<std::int64_t>(e * segments / edges);
  Matrix out(segments, 128);
  for (auto _ : state) {
    Fn(values, weights, seg, out);
    benchmark::DoNotOptimize(out.data().data());
  }
}

void Setup(const benchmark::State&) { kernels::configure_threads_from_env(); }

BENCHMARK(BM_Spgemm<kernels::serial::spgemm_scaled>)->Name("spgemm/serial")->Arg(2000)->Arg(8000);
BENCHMARK(BM_Spgemm<kernels::omp::spgemm_scaled>)->Name("spgemm/omp")->Arg(2000)->Arg(8000)->Setup(Setup);
BENCHMARK(BM_Gemm<kernels::serial::gemm>)->Name("gemm/serial")->Arg(512)->Arg(2048);
BENCHMARK(BM_Gemm<kernels::omp::gemm>)->Name("gemm/omp")->Arg(512)->Arg(2048)->Setup(Setup);
BENCHMARK(BM_SegmentSum<kernels::serial::segment_weighted_sum>)->Name("segsum/serial")->Arg(20000)->Arg(200000);
BENCHMARK(BM_SegmentSum<kernels::omp::segment_weighted_sum>)->Name("segsum/omp")->Arg(20000)->Arg(200000)->Setup(Setup);

}  // namespace

BENCHMARK_MAIN();
