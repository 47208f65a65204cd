#include <map>

#include "latte/kernels.hpp"
#include "shape.hpp"

namespace latte::kernels::serial {

SparseBiadj spgemm_scaled(const SparseBiadj& a, std::span<const double> scale,
                          const SparseBiadj& b) {
  detail::check_spgemm(a, scale.size(), b);
  std::vector<std::int64_t> indptr{0};
  std::vector<std::int64_t> indices;
  std::vector<double> values;
  for (std::int64_t i = 0; i < a.n_rows(); ++i) {
    std::map<std::int64_t, double> acc;
    auto a_cols = a.row_indices(i);
    auto a_vals = a.row_values(i);
    for (std::size_t e = 0; e < a_cols.size(); ++e) {
      const auto j = a_cols[e];
      if (scale[j] == 0.0) continue;
      const double left = a_vals[e] * scale[j];
      auto b_cols = b.row_indices(j);
      auto b_vals = b.row_values(j);
      for (std::size_t f = 0; f < b_cols.size(); ++f) acc[b_cols[f]] += left * b_vals[f];
    }
    for (const auto& [col, v] : acc) {
      if (v == 0.0) continue;
      indices.push_back(col);
      values.push_back(v);
    }
    indptr.push_back(static_cast<std::int64_t>(indices.size()));
  }
  return SparseBiadj::from_csr(a.n_rows(), b.n_cols(), std::move(indptr), std::move(indices),
                               std::move(values));
}

void gemm(const Matrix& a, Trans ta, const Matrix& b, Trans tb, Matrix& c, bool accumulate) {
  const auto s = detail::gemm_shape(a, ta, b, tb);
  detail::prepare_output(c, s, accumulate);
  auto at = [&](std::size_t i, std::size_t p) { return ta == Trans::kNo ? a(i, p) : a(p, i); };
  auto bt = [&](std::size_t p, std::size_t j) { return tb == Trans::kNo ? b(p, j) : b(j, p); };
  for (std::size_t i = 0; i < s.m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) sum += at(i, p) * bt(p, j);
      c(i, j) += sum;
    }
  }
}

void segment_weighted_sum(const Matrix& values, std::span<const double> weights,
                          std::span<const std::int64_t> segment, Matrix& out) {
  detail::check_segments(values, weights.size(), segment.size());
  for (std::size_t e = 0; e < values.rows(); ++e) {
    auto dst = out.row(static_cast<std::size_t>(segment[e]));
    auto src = values.row(e);
    for (std::size_t d = 0; d < src.size(); ++d) dst[d] += weights[e] * src[d];
  }
}

}  // namespace latte::kernels::serial
