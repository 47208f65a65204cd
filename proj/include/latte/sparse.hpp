#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace latte {

struct Triple {
  std::int64_t row;
  std::int64_t col;
  double weight;
};

/// Rectangular biadjacency matrix in CSR layout. Stored weights are strictly
/// positive; an absent entry means no link. Column indices within a row are
/// sorted ascending and unique.
class SparseBiadj {
 public:
  SparseBiadj() = default;
  SparseBiadj(std::int64_t n_rows, std::int64_t n_cols);

  /// Builds from unordered triples. Duplicates are summed, zero weights are
  /// dropped. Throws ValidationError on out-of-range ids or negative/non-finite
  /// weights.
  static SparseBiadj from_triples(std::int64_t n_rows, std::int64_t n_cols,
                                  std::vector<Triple> triples);

  /// Adopts CSR arrays after checking them.
  static SparseBiadj from_csr(std::int64_t n_rows, std::int64_t n_cols,
                              std::vector<std::int64_t> indptr,
                              std::vector<std::int64_t> indices,
                              std::vector<double> values);

  std::int64_t n_rows() const { return n_rows_; }
  std::int64_t n_cols() const { return n_cols_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(indices_.size()); }
  double density() const;

  std::int64_t degree(std::int64_t row) const { return indptr_[row + 1] - indptr_[row]; }
  std::span<const std::int64_t> row_indices(std::int64_t row) const;
  std::span<const double> row_values(std::int64_t row) const;

  const std::vector<std::int64_t>& indptr() const { return indptr_; }
  const std::vector<std::int64_t>& indices() const { return indices_; }
  const std::vector<double>& values() const { return values_; }

  /// Weight at (row, col), 0 when absent.
  double at(std::int64_t row, std::int64_t col) const;
  bool contains(std::int64_t row, std::int64_t col) const { return at(row, col) > 0.0; }

  SparseBiadj transpose() const;
  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;
  std::vector<Triple> triples() const;
  std::int64_t max_degree() const;

  /// Keeps only entries for which keep(row, col) is true.
  template <class Pred>
  SparseBiadj filter(Pred keep) const {
    std::vector<std::int64_t> ptr(static_cast<std::size_t>(n_rows_) + 1, 0);
    std::vector<std::int64_t> idx;
    std::vector<double> val;
    for (std::int64_t r = 0; r < n_rows_; ++r) {
      for (std::int64_t e = indptr_[r]; e < indptr_[r + 1]; ++e) {
        if (keep(r, indices_[e], values_[e])) {
          idx.push_back(indices_[e]);
          val.push_back(values_[e]);
        }
      }
      ptr[r + 1] = static_cast<std::int64_t>(idx.size());
    }
    SparseBiadj out(n_rows_, n_cols_);
    out.indptr_ = std::move(ptr);
    out.indices_ = std::move(idx);
    out.values_ = std::move(val);
    return out;
  }

  bool operator==(const SparseBiadj& o) const = default;

 private:
  std::int64_t n_rows_ = 0;
  std::int64_t n_cols_ = 0;
  std::vector<std::int64_t> indptr_{0};
  std::vector<std::int64_t> indices_;
  std::vector<double> values_;
};

}  // namespace latte
