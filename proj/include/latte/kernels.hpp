#pragma once

#include <cstdint>
#include <span>

#include "latte/matrix.hpp"
#include "latte/sparse.hpp"

// Hot loops of the library. Each kernel has a plain serial reference and an
// OpenMP version; both produce bit-identical results because the per-output
// accumulation order is the same. The unqualified entry points run the OpenMP
// version under the thread cap; the serial ones are the test reference.
namespace latte::kernels {

enum class Trans { kNo, kYes };

namespace serial {

/// A · diag(scale) · B. Columns with scale 0 contribute nothing.
SparseBiadj spgemm_scaled(const SparseBiadj& a, std::span<const double> scale,
                          const SparseBiadj& b);

/// c = op(a)·op(b), or c += op(a)·op(b) when accumulate is set.
void gemm(const Matrix& a, Trans ta, const Matrix& b, Trans tb, Matrix& c, bool accumulate);

/// out[s] += sum over rows e with segment[e]==s of weight[e] * values[e].
/// Segments must be sorted non-decreasing.
void segment_weighted_sum(const Matrix& values, std::span<const double> weights,
                          std::span<const std::int64_t> segment, Matrix& out);

}  // namespace serial

namespace omp {

SparseBiadj spgemm_scaled(const SparseBiadj& a, std::span<const double> scale,
                          const SparseBiadj& b);
void gemm(const Matrix& a, Trans ta, const Matrix& b, Trans tb, Matrix& c, bool accumulate);
void segment_weighted_sum(const Matrix& values, std::span<const double> weights,
                          std::span<const std::int64_t> segment, Matrix& out);

}  // namespace omp

SparseBiadj spgemm_scaled(const SparseBiadj& a, std::span<const double> scale,
                          const SparseBiadj& b);
void gemm(const Matrix& a, Trans ta, const Matrix& b, Trans tb, Matrix& c, bool accumulate);
void segment_weighted_sum(const Matrix& values, std::span<const double> weights,
                          std::span<const std::int64_t> segment, Matrix& out);

/// Thread cap for the dispatching entry points (>= 1).
int max_threads();
void set_max_threads(int n);
/// Applies LATTE_THREADS from the environment, if set.
void configure_threads_from_env();

}  // namespace latte::kernels
