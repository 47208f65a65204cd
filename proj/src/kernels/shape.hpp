#pragma once

#include <cstddef>
#include <string>

#include "latte/error.hpp"
#include "latte/kernels.hpp"

namespace latte::kernels::detail {

struct GemmShape {
  std::size_t m, k, n;
};

inline GemmShape gemm_shape(const Matrix& a, Trans ta, const Matrix& b, Trans tb) {
  const auto am = ta == Trans::kNo ? a.rows() : a.cols();
  const auto ak = ta == Trans::kNo ? a.cols() : a.rows();
  const auto bk = tb == Trans::kNo ? b.rows() : b.cols();
  const auto bn = tb == Trans::kNo ? b.cols() : b.rows();
  if (ak != bk) {
    throw ValidationError("gemm inner dimension mismatch: " + std::to_string(ak) + " vs " +
                          std::to_string(bk));
  }
  return {am, ak, bn};
}

inline void prepare_output(Matrix& c, const GemmShape& s, bool accumulate) {
  if (accumulate) {
    if (c.rows() != s.m || c.cols() != s.n) throw ValidationError("gemm accumulate shape mismatch");
  } else {
    c = Matrix(s.m, s.n);
  }
}

inline void check_spgemm(const SparseBiadj& a, std::size_t scale_len, const SparseBiadj& b) {
  if (a.n_cols() != b.n_rows()) {
    throw ValidationError("compose inner dimension mismatch: " + std::to_string(a.n_cols()) +
                          " vs " + std::to_string(b.n_rows()));
  }
  if (scale_len != static_cast<std::size_t>(a.n_cols())) {
    throw ValidationError("compose scale length mismatch");
  }
}

inline void check_segments(const Matrix& values, std::size_t n_weights, std::size_t n_segment) {
  if (n_weights != values.rows() || n_segment != values.rows()) {
    throw ValidationError("segment_weighted_sum length mismatch");
  }
}

}  // namespace latte::kernels::detail
