#include <algorithm>
#include <omp.h>

#include "latte/kernels.hpp"
#include "shape.hpp"

namespace latte::kernels::omp {

SparseBiadj spgemm_scaled(const SparseBiadj& a, std::span<const double> scale,
                          const SparseBiadj& b) {
  detail::check_spgemm(a, scale.size(), b);
  const auto n_rows = a.n_rows();
  const auto n_cols = b.n_cols();
  std::vector<std::vector<std::int64_t>> row_idx(static_cast<std::size_t>(n_rows));
  std::vector<std::vector<double>> row_val(static_cast<std::size_t>(n_rows));

#pragma omp parallel
  {
    // Dense accumulator with a touched-column list, one per thread.
    std::vector<double> acc(static_cast<std::size_t>(n_cols), 0.0);
    std::vector<char> used(static_cast<std::size_t>(n_cols), 0);
    std::vector<std::int64_t> touched;
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < n_rows; ++i) {
      touched.clear();
      auto a_cols = a.row_indices(i);
      auto a_vals = a.row_values(i);
      for (std::size_t e = 0; e < a_cols.size(); ++e) {
        const auto j = a_cols[e];
        if (scale[j] == 0.0) continue;
        const double left = a_vals[e] * scale[j];
        auto b_cols = b.row_indices(j);
        auto b_vals = b.row_values(j);
        for (std::size_t f = 0; f < b_cols.size(); ++f) {
          const auto k = b_cols[f];
          if (!used[k]) {
            used[k] = 1;
            touched.push_back(k);
          }
          acc[k] += left * b_vals[f];
        }
      }
      std::sort(touched.begin(), touched.end());
      auto& ri = row_idx[i];
      auto& rv = row_val[i];
      for (auto k : touched) {
        if (acc[k] != 0.0) {
          ri.push_back(k);
          rv.push_back(acc[k]);
        }
        acc[k] = 0.0;
        used[k] = 0;
      }
    }
  }

  std::vector<std::int64_t> indptr(static_cast<std::size_t>(n_rows) + 1, 0);
  for (std::int64_t i = 0; i < n_rows; ++i) {
    indptr[i + 1] = indptr[i] + static_cast<std::int64_t>(row_idx[i].size());
  }
  std::vector<std::int64_t> indices(static_cast<std::size_t>(indptr.back()));
  std::vector<double> values(indices.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_rows; ++i) {
    std::copy(row_idx[i].begin(), row_idx[i].end(), indices.begin() + indptr[i]);
    std::copy(row_val[i].begin(), row_val[i].end(), values.begin() + indptr[i]);
  }
  return SparseBiadj::from_csr(n_rows, n_cols, std::move(indptr), std::move(indices),
                               std::move(values));
}

void gemm(const Matrix& a, Trans ta, const Matrix& b, Trans tb, Matrix& c, bool accumulate) {
  const auto s = detail::gemm_shape(a, ta, b, tb);
  detail::prepare_output(c, s, accumulate);
  const auto m = static_cast<std::int64_t>(s.m);
  const bool a_t = ta == Trans::kYes;
  const bool b_t = tb == Trans::kYes;
#pragma omp parallel
  {
    std::vector<double> buf(s.n);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
      std::fill(buf.begin(), buf.end(), 0.0);
      for (std::size_t p = 0; p < s.k; ++p) {
        const double aip = a_t ? a(p, i) : a(i, p);
        if (b_t) {
          for (std::size_t j = 0; j < s.n; ++j) buf[j] += aip * b(j, p);
        } else {
          const double* brow = b.data().data() + p * s.n;
          for (std::size_t j = 0; j < s.n; ++j) buf[j] += aip * brow[j];
        }
      }
      auto crow = c.row(static_cast<std::size_t>(i));
      for (std::size_t j = 0; j < s.n; ++j) crow[j] += buf[j];
    }
  }
}

void segment_weighted_sum(const Matrix& values, std::span<const double> weights,
                          std::span<const std::int64_t> segment, Matrix& out) {
  detail::check_segments(values, weights.size(), segment.size());
  const auto n = static_cast<std::int64_t>(segment.size());
  // Segment boundaries: each thread owns whole segments, so rows are summed in
  // the same order as the serial loop.
  std::vector<std::int64_t> starts;
  for (std::int64_t e = 0; e < n; ++e) {
    if (e == 0 || segment[e] != segment[e - 1]) starts.push_back(e);
  }
  starts.push_back(n);
  const auto n_runs = static_cast<std::int64_t>(starts.size()) - 1;
  const auto width = values.cols();
#pragma omp parallel for schedule(dynamic, 32)
  for (std::int64_t r = 0; r < n_runs; ++r) {
    auto dst = out.row(static_cast<std::size_t>(segment[starts[r]]));
    for (std::int64_t e = starts[r]; e < starts[r + 1]; ++e) {
      auto src = values.row(static_cast<std::size_t>(e));
      for (std::size_t d = 0; d < width; ++d) dst[d] += weights[e] * src[d];
    }
  }
}

}  // namespace latte::kernels::omp
