// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_SVD_HPP
#define ROMBAYES_SVD_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "rombayes/common.hpp"
#include "rombayes/dense.hpp"

namespace rombayes {

// Thin SVD of a tall matrix S (rows >= cols): S = U diag(sigma) V^T with
// U (rows x cols) and V (cols x cols) having orthonormal columns and sigma
// nonnegative, descending.
struct ThinSvd {
  DenseMatrix u;
  Vector sigma;
  DenseMatrix v;
};

namespace detail {

// Economy Householder QR: A (m x n, m >= n) -> Q (m x n) with orthonormal
// columns and upper-triangular R (n x n), A = Q R.
inline void householder_qr(DenseMatrix a, DenseMatrix& q, DenseMatrix& r) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<Vector> hh(n);   // Householder vectors, unit leading entry
  Vector beta(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    // Build reflector for column j below the diagonal.
    double xnorm = 0.0;
    for (std::size_t i = j; i < m; ++i) xnorm += a(i, j) * a(i, j);
    xnorm = std::sqrt(xnorm);
    Vector v(m - j, 0.0);
    const double x0 = a(j, j);
    if (xnorm == 0.0) {
      hh[j] = std::move(v);
      beta[j] = 0.0;
      continue;
    }
    const double alpha = (x0 >= 0.0) ? -xnorm : xnorm;
    v[0] = x0 - alpha;
    for (std::size_t i = j + 1; i < m; ++i) v[i - j] = a(i, j);
    const double vnorm2 = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
    if (vnorm2 == 0.0) {
      hh[j] = std::move(v);
      beta[j] = 0.0;
      continue;
    }
    const double b = 2.0 / vnorm2;
    // Apply H = I - b v v^T to trailing columns.
    for (std::size_t c = j; c < n; ++c) {
      double s = 0.0;
      for (std::size_t i = j; i < m; ++i) s += v[i - j] * a(i, c);
      s *= b;
      for (std::size_t i = j; i < m; ++i) a(i, c) -= s * v[i - j];
    }
    hh[j] = std::move(v);
    beta[j] = b;
  }
  r = DenseMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i <= j; ++i) r(i, j) = a(i, j);
  // Q = H_0 ... H_{n-1} applied to the first n identity columns.
  q = DenseMatrix(m, n);
  for (std::size_t j = 0; j < n; ++j) q(j, j) = 1.0;
  for (std::size_t jj = n; jj-- > 0;) {
    if (beta[jj] == 0.0) continue;
    const Vector& v = hh[jj];
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t i = jj; i < m; ++i) s += v[i - jj] * q(i, c);
      s *= beta[jj];
      for (std::size_t i = jj; i < m; ++i) q(i, c) -= s * v[i - jj];
    }
  }
}

// One-sided Jacobi: orthogonalizes the columns of g in place, accumulating the
// right rotations into w (must start as identity). On exit g = U * diag(sigma)
// and original g = g_out * w^T.
inline void one_sided_jacobi(DenseMatrix& g, DenseMatrix& w) {
  const std::size_t n = g.cols();
  constexpr double kTol = 1e-15;
  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double a = dot(g.col(p), g.col(p));
        const double b = dot(g.col(q), g.col(q));
        const double c = dot(g.col(p), g.col(q));
        if (std::abs(c) <= kTol * std::sqrt(a * b)) continue;
        const double zeta = (b - a) / (2.0 * c);
        const double t = ((zeta >= 0.0) ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        auto gp = g.col(p), gq = g.col(q);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          const double xp = gp[i], xq = gq[i];
          gp[i] = cs * xp - sn * xq;
          gq[i] = sn * xp + cs * xq;
        }
        auto wp = w.col(p), wq = w.col(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double xp = wp[i], xq = wq[i];
          wp[i] = cs * xp - sn * xq;
          wq[i] = sn * xp + cs * xq;
        }
        rotated = true;
      }
    }
    if (!rotated) break;
  }
}

}  // namespace detail

inline ThinSvd thin_svd(const DenseMatrix& s) {
  require(s.cols() >= 1, "thin_svd: need at least one column");
  require(s.rows() >= s.cols(), "thin_svd: matrix must be tall (rows >= cols)");
  const std::size_t n = s.cols();

  DenseMatrix q, r;
  detail::householder_qr(s, q, r);

  DenseMatrix g = r;
  DenseMatrix w = DenseMatrix::identity(n);
  detail::one_sided_jacobi(g, w);

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(g.col(j));

  // Descending order, stable under ties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  ThinSvd out;
  out.sigma.resize(n);
  out.v = DenseMatrix(n, n);
  DenseMatrix ur(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.sigma[j] = sigma[src];
    std::copy(w.col(src).begin(), w.col(src).end(), out.v.col(j).begin());
    if (sigma[src] > 0.0) {
      const double inv = 1.0 / sigma[src];
      for (std::size_t i = 0; i < n; ++i) ur(i, j) = g(i, src) * inv;
    }
  }
  // Exact-zero singular values: complete U with orthonormal columns so the
  // orthogonality contract still holds.
  for (std::size_t j = 0; j < n; ++j) {
    if (out.sigma[j] > 0.0) continue;
    for (std::size_t cand = 0; cand < n; ++cand) {
      Vector e(n, 0.0);
      e[cand] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t c = 0; c < n; ++c) {
          if (c == j) continue;
          if (out.sigma[c] == 0.0 && c > j) continue;  // not yet filled
          const double proj = dot(std::span<const double>(e), ur.col(c));
          axpy(-proj, ur.col(c), std::span<double>(e));
        }
      }
      const double en = norm2(std::span<const double>(e));
      if (en > 0.5) {
        for (std::size_t i = 0; i < n; ++i) ur(i, j) = e[i] / en;
        break;
      }
    }
  }
  out.u = matmul(q, ur);
  return out;
}

}  // namespace rombayes

#endif  // ROMBAYES_SVD_HPP
