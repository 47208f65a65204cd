#include "latte/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "latte/error.hpp"

namespace latte {

SparseBiadj::SparseBiadj(std::int64_t n_rows, std::int64_t n_cols)
    : n_rows_(n_rows), n_cols_(n_cols), indptr_(static_cast<std::size_t>(n_rows) + 1, 0) {
  if (n_rows < 0 || n_cols < 0) throw ValidationError("negative matrix dimension");
}

SparseBiadj SparseBiadj::from_triples(std::int64_t n_rows, std::int64_t n_cols,
                                      std::vector<Triple> triples) {
  SparseBiadj out(n_rows, n_cols);
  for (const auto& t : triples) {
    if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols) {
      throw ValidationError("entry (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                            ") outside " + std::to_string(n_rows) + "x" + std::to_string(n_cols));
    }
    if (!std::isfinite(t.weight)) throw ValidationError("non-finite edge weight");
    if (t.weight < 0.0) throw ValidationError("negative edge weight");
  }
  std::sort(triples.begin(), triples.end(), [](const Triple& a, const Triple& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  // Duplicates collapse by summation.
  std::size_t w = 0;
  for (std::size_t r = 0; r < triples.size(); ++r) {
    if (w > 0 && triples[w - 1].row == triples[r].row && triples[w - 1].col == triples[r].col) {
      triples[w - 1].weight += triples[r].weight;
    } else {
      triples[w++] = triples[r];
    }
  }
  triples.resize(w);
  for (const auto& t : triples) {
    if (t.weight <= 0.0) continue;
    out.indices_.push_back(t.col);
    out.values_.push_back(t.weight);
    ++out.indptr_[t.row + 1];
  }
  for (std::int64_t r = 0; r < n_rows; ++r) out.indptr_[r + 1] += out.indptr_[r];
  return out;
}

SparseBiadj SparseBiadj::from_csr(std::int64_t n_rows, std::int64_t n_cols,
                                  std::vector<std::int64_t> indptr,
                                  std::vector<std::int64_t> indices, std::vector<double> values) {
  if (indptr.size() != static_cast<std::size_t>(n_rows) + 1 || indptr.front() != 0 ||
      indptr.back() != static_cast<std::int64_t>(indices.size()) ||
      indices.size() != values.size()) {
    throw ValidationError("inconsistent CSR arrays");
  }
  for (std::int64_t r = 0; r < n_rows; ++r) {
    if (indptr[r] > indptr[r + 1]) throw ValidationError("indptr not monotone");
    for (std::int64_t e = indptr[r]; e < indptr[r + 1]; ++e) {
      if (indices[e] < 0 || indices[e] >= n_cols) throw ValidationError("CSR column out of range");
      if (e > indptr[r] && indices[e] <= indices[e - 1]) {
        throw ValidationError("CSR columns not strictly increasing");
      }
      if (!(values[e] > 0.0) || !std::isfinite(values[e])) {
        throw ValidationError("CSR values must be positive and finite");
      }
    }
  }
  SparseBiadj out(n_rows, n_cols);
  out.indptr_ = std::move(indptr);
  out.indices_ = std::move(indices);
  out.values_ = std::move(values);
  return out;
}

double SparseBiadj::density() const {
  if (n_rows_ == 0 || n_cols_ == 0) return 0.0;
  return static_cast<double>(nnz()) / (static_cast<double>(n_rows_) * static_cast<double>(n_cols_));
}

std::span<const std::int64_t> SparseBiadj::row_indices(std::int64_t row) const {
  return {indices_.data() + indptr_[row], static_cast<std::size_t>(degree(row))};
}

std::span<const double> SparseBiadj::row_values(std::int64_t row) const {
  return {values_.data() + indptr_[row], static_cast<std::size_t>(degree(row))};
}

double SparseBiadj::at(std::int64_t row, std::int64_t col) const {
  if (row < 0 || row >= n_rows_ || col < 0 || col >= n_cols_) return 0.0;
  auto cols = row_indices(row);
  auto it = std::lower_bound(cols.begin(), cols.end(), col);
  if (it == cols.end() || *it != col) return 0.0;
  return values_[indptr_[row] + (it - cols.begin())];
}

SparseBiadj SparseBiadj::transpose() const {
  SparseBiadj out(n_cols_, n_rows_);
  out.indices_.resize(indices_.size());
  out.values_.resize(values_.size());
  for (auto c : indices_) ++out.indptr_[c + 1];
  for (std::int64_t c = 0; c < n_cols_; ++c) out.indptr_[c + 1] += out.indptr_[c];
  std::vector<std::int64_t> cursor(out.indptr_.begin(), out.indptr_.end() - 1);
  // Row-major traversal keeps the transposed rows sorted.
  for (std::int64_t r = 0; r < n_rows_; ++r) {
    for (std::int64_t e = indptr_[r]; e < indptr_[r + 1]; ++e) {
      auto slot = cursor[indices_[e]]++;
      out.indices_[slot] = r;
      out.values_[slot] = values_[e];
    }
  }
  return out;
}

std::vector<double> SparseBiadj::row_sums() const {
  std::vector<double> s(static_cast<std::size_t>(n_rows_), 0.0);
  for (std::int64_t r = 0; r < n_rows_; ++r) {
    for (std::int64_t e = indptr_[r]; e < indptr_[r + 1]; ++e) s[r] += values_[e];
  }
  return s;
}

std::vector<double> SparseBiadj::col_sums() const {
  std::vector<double> s(static_cast<std::size_t>(n_cols_), 0.0);
  for (std::size_t e = 0; e < indices_.size(); ++e) s[indices_[e]] += values_[e];
  return s;
}

std::vector<Triple> SparseBiadj::triples() const {
  std::vector<Triple> out;
  out.reserve(indices_.size());
  for (std::int64_t r = 0; r < n_rows_; ++r) {
    for (std::int64_t e = indptr_[r]; e < indptr_[r + 1]; ++e) {
      out.push_back({r, indices_[e], values_[e]});
    }
  }
  return out;
}

std::int64_t SparseBiadj::max_degree() const {
  std::int64_t m = 0;
  for (std::int64_t r = 0; r < n_rows_; ++r) m = std::max(m, degree(r));
  return m;
}

}  // namespace latte
