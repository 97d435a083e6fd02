// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_GMRES_HPP
#define ROMBAYES_GMRES_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rombayes/common.hpp"

namespace rombayes {

// Matrix-free linear operator: out = Op(in).
using LinOp = std::function<void(std::span<const double>, std::span<double>)>;

struct GmresResult {
  int iterations = 0;
  double relative_residual = 1.0;  // in the (preconditioned) residual norm
  bool converged = false;
  bool breakdown = false;
  std::vector<double> residual_history;  // relative residual after each iteration
};

// Restart-free GMRES with modified Gram-Schmidt and one reorthogonalization
// pass, Givens least squares. Solves op(x) = b starting from the passed-in x;
// when precond is given it is applied on the left (residual norms are then the
// preconditioned ones).
inline GmresResult gmres(const LinOp& op, std::span<const double> b, std::span<double> x,
                         double tol, int maxit = 200, const LinOp* precond = nullptr) {
  const std::size_t n = b.size();
  require(x.size() == n, "gmres: shape mismatch");
  require(tol > 0.0, "gmres: tolerance must be positive");
  require(maxit >= 1, "gmres: maxit must be >= 1");

  GmresResult res;
  auto apply_op = [&](std::span<const double> in, std::span<double> out) {
    if (precond == nullptr) {
      op(in, out);
    } else {
      Vector t(n);
      op(in, t);
      (*precond)(t, out);
    }
  };

  // r0 = M (b - A x)
  Vector r0(n);
  {
    Vector ax(n);
    op(x, ax);
    for (std::size_t i = 0; i < n; ++i) ax[i] = b[i] - ax[i];
    if (precond == nullptr) {
      r0 = ax;
    } else {
      (*precond)(ax, r0);
    }
  }
  const double beta = norm2(r0);
  if (!std::isfinite(beta)) throw NonFiniteError("gmres: non-finite initial residual");
  if (beta == 0.0) {
    res.converged = true;
    res.relative_residual = 0.0;
    return res;
  }

  std::vector<Vector> v;
  v.emplace_back(n);
  for (std::size_t i = 0; i < n; ++i) v[0][i] = r0[i] / beta;

  std::vector<Vector> hcols;        // column j holds h(0..j+1, j)
  std::vector<double> cs, sn;       // Givens rotations
  Vector g(1, beta);                // rotated rhs; |g.back()| = current residual
  const double breakdown_tol = 1e-14 * beta;

  int j = 0;
  for (; j < maxit; ++j) {
    Vector w(n);
    apply_op(v[j], w);
    Vector h(j + 2, 0.0);
    for (int i = 0; i <= j; ++i) {
      const double hij = dot(v[i], w);
      h[i] = hij;
      axpy(-hij, v[i], std::span<double>(w));
    }
    for (int i = 0; i <= j; ++i) {  // one reorthogonalization pass
      const double c = dot(v[i], w);
      h[i] += c;
      axpy(-c, v[i], std::span<double>(w));
    }
    const double h_next = norm2(w);
    h[j + 1] = h_next;
    // Accumulated rotations touch entries 0..j only; h[j+1] stays h_next.
    for (int i = 0; i < j; ++i) {
      const double t = cs[i] * h[i] + sn[i] * h[i + 1];
      h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
      h[i] = t;
    }
    const double denom = std::hypot(h[j], h_next);
    const double c_new = (denom == 0.0) ? 1.0 : h[j] / denom;
    const double s_new = (denom == 0.0) ? 0.0 : h_next / denom;
    cs.push_back(c_new);
    sn.push_back(s_new);
    h[j] = denom;
    const double gj = g[j];
    g[j] = c_new * gj;
    g.push_back(-s_new * gj);
    hcols.push_back(std::move(h));

    const double rel = std::abs(g[j + 1]) / beta;
    res.residual_history.push_back(rel);
    res.iterations = j + 1;
    res.relative_residual = rel;
    if (rel <= tol) {
      res.converged = true;
      ++j;
      break;
    }
    if (h_next <= breakdown_tol) {
      // Krylov space is invariant; the subspace solution is exact, so failing
      // to meet tol here is a genuine breakdown.
      res.breakdown = true;
      ++j;
      break;
    }
    v.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) v[j + 1][i] = w[i] / h_next;
  }

  // Back-substitute R y = g over the j columns actually built.
  const int m = static_cast<int>(hcols.size());
  Vector y(m, 0.0);
  for (int i = m - 1; i >= 0; --i) {
    double s = g[i];
    for (int l = i + 1; l < m; ++l) s -= hcols[l][i] * y[l];
    y[i] = s / hcols[i][i];
  }
  for (int i = 0; i < m; ++i) axpy(y[i], v[i], x);
  return res;
}

}  // namespace rombayes

#endif  // ROMBAYES_GMRES_HPP
