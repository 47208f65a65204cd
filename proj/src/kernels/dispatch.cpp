#include <algorithm>
#include <cstdlib>
#include <omp.h>

#include "latte/kernels.hpp"

namespace latte::kernels {

namespace {
int g_threads = 0;  // 0: follow the OpenMP runtime default
}

int max_threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

void set_max_threads(int n) {
  g_threads = std::max(1, n);
  omp_set_num_threads(g_threads);
}

void configure_threads_from_env() {
  if (const char* v = std::getenv("LATTE_THREADS")) {
    int n = std::atoi(v);
    if (n > 0) set_max_threads(n);
  }
}

SparseBiadj spgemm_scaled(const SparseBiadj& a, std::span<const double> scale,
                          const SparseBiadj& b) {
  return omp::spgemm_scaled(a, scale, b);
}

void gemm(const Matrix& a, Trans ta, const Matrix& b, Trans tb, Matrix& c, bool accumulate) {
  omp::gemm(a, ta, b, tb, c, accumulate);
}

void segment_weighted_sum(const Matrix& values, std::span<const double> weights,
                          std::span<const std::int64_t> segment, Matrix& out) {
  omp::segment_weighted_sum(values, weights, segment, out);
}

}  // namespace latte::kernels
