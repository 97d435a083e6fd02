// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_SPARSE_HPP
#define ROMBAYES_SPARSE_HPP

#include <algorithm>
#include <cstddef>
#include <span>
#include <tuple>
#include <vector>

#include "rombayes/common.hpp"
#include "rombayes/dense.hpp"

namespace rombayes {

// Compressed sparse row matrix.
// Invariants: row_ptr has n_rows+1 nondecreasing entries; column indices are
// strictly increasing within each row; vals parallel to col_idx.
struct SparseMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col_idx;
  std::vector<double> vals;

  std::size_t nnz() const { return vals.size(); }

  // Builds CSR from (row, col, value) triplets; duplicates are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<std::tuple<std::size_t, std::size_t, double>> trips) {
    for (const auto& [r, c, v] : trips) {
      require(r < rows && c < cols, "from_triplets: index out of range");
      (void)v;
    }
    std::sort(trips.begin(), trips.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    SparseMatrix m;
    m.n_rows = rows;
    m.n_cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    for (std::size_t t = 0; t < trips.size();) {
      const auto [r, c, v0] = trips[t];
      double v = v0;
      std::size_t u = t + 1;
      while (u < trips.size() && std::get<0>(trips[u]) == r && std::get<1>(trips[u]) == c) {
        v += std::get<2>(trips[u]);
        ++u;
      }
      m.col_idx.push_back(c);
      m.vals.push_back(v);
      m.row_ptr[r + 1] += 1;
      t = u;
    }
    for (std::size_t r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
  }

  Vector diagonal() const {
    require(n_rows == n_cols, "diagonal: matrix must be square");
    Vector d(n_rows, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r) {
      for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
        if (col_idx[p] == r) d[r] = vals[p];
      }
    }
    return d;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(n_rows, n_cols);
    for (std::size_t r = 0; r < n_rows; ++r)
      for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) d(r, col_idx[p]) = vals[p];
    return d;
  }
};

// y = A x
inline void spmv(const SparseMatrix& a, std::span<const double> x, std::span<double> y) {
  require(x.size() == a.n_cols && y.size() == a.n_rows, "spmv: shape mismatch");
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    double s = 0.0;
    for (std::size_t p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) s += a.vals[p] * x[a.col_idx[p]];
    y[r] = s;
  }
}

inline Vector spmv(const SparseMatrix& a, const Vector& x) {
  Vector y(a.n_rows);
  spmv(a, std::span<const double>(x), std::span<double>(y));
  return y;
}

inline SparseMatrix csr_transpose(const SparseMatrix& a) {
  SparseMatrix t;
  t.n_rows = a.n_cols;
  t.n_cols = a.n_rows;
  t.row_ptr.assign(t.n_rows + 1, 0);
  for (std::size_t c : a.col_idx) t.row_ptr[c + 1] += 1;
  for (std::size_t r = 0; r < t.n_rows; ++r) t.row_ptr[r + 1] += t.row_ptr[r];
  t.col_idx.resize(a.nnz());
  t.vals.resize(a.nnz());
  std::vector<std::size_t> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    for (std::size_t p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) {
      const std::size_t pos = next[a.col_idx[p]]++;
      t.col_idx[pos] = r;  // rows of a visited in order, so columns stay sorted
      t.vals[pos] = a.vals[p];
    }
  }
  return t;
}

// C = A B using a sparse accumulator per row.
inline SparseMatrix csr_matmul(const SparseMatrix& a, const SparseMatrix& b) {
  require(a.n_cols == b.n_rows, "csr_matmul: shape mismatch");
  SparseMatrix c;
  c.n_rows = a.n_rows;
  c.n_cols = b.n_cols;
  c.row_ptr.assign(a.n_rows + 1, 0);
  std::vector<double> acc(b.n_cols, 0.0);
  std::vector<std::size_t> marked;
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    marked.clear();
    for (std::size_t p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) {
      const double av = a.vals[p];
      const std::size_t k = a.col_idx[p];
      for (std::size_t q = b.row_ptr[k]; q < b.row_ptr[k + 1]; ++q) {
        const std::size_t col = b.col_idx[q];
        if (acc[col] == 0.0 && std::find(marked.begin(), marked.end(), col) == marked.end())
          marked.push_back(col);
        acc[col] += av * b.vals[q];
      }
    }
    std::sort(marked.begin(), marked.end());
    for (std::size_t col : marked) {
      c.col_idx.push_back(col);
      c.vals.push_back(acc[col]);
      acc[col] = 0.0;
    }
    c.row_ptr[r + 1] = c.col_idx.size();
  }
  return c;
}

}  // namespace rombayes

#endif  // ROMBAYES_SPARSE_HPP
