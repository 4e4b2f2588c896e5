/*
 * Copyright (c) 2026, the madpr authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "madpr/common.hpp"
#include "madpr/dense.hpp"
#include "madpr/distance.hpp"
#include "madpr/rng.hpp"

namespace madpr {

// ---------------------------------------------------------------------------
// Symmetric tridiagonal eigensolver (implicit QL with shifts). diag/off are
// overwritten; z must come in as identity (or any orthogonal basis) and
// leaves with the eigenvectors in its columns. Pairs are sorted ascending.
// ---------------------------------------------------------------------------

inline void tridiagonal_eig(std::vector<double>& diag, std::vector<double>& off,
                            DenseMatrix& z) {
  size_t n = diag.size();
  if (n == 0) return;
  std::vector<double> e(n, 0.0);
  for (size_t i = 0; i + 1 < n; ++i) e[i] = off[i];

  auto hypot2 = [](double a, double b) { return std::hypot(a, b); };
  for (size_t l = 0; l < n; ++l) {
    size_t iter = 0;
    size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        double dd = std::abs(diag[m]) + std::abs(diag[m + 1]);
        if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= 2.3e-16 * dd) break;
      }
      if (m != l) {
        if (iter++ == 100)
          throw RuntimeError("tridiagonal QL iteration did not converge");
        double g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
        double r = hypot2(g, 1.0);
        g = diag[m] - diag[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        for (size_t ii = m; ii-- > l;) {
          double f = s * e[ii];
          double b = c * e[ii];
          r = hypot2(f, g);
          e[ii + 1] = r;
          if (r == 0.0) {
            diag[ii + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = diag[ii + 1] - p;
          r = (diag[ii] - g) * s + 2.0 * c * b;
          p = s * r;
          diag[ii + 1] = g + p;
          g = c * r - b;
          for (size_t k = 0; k < z.rows(); ++k) {
            f = z(k, ii + 1);
            z(k, ii + 1) = s * z(k, ii) + c * f;
            z(k, ii) = c * z(k, ii) - s * f;
          }
        }
        if (r == 0.0 && m - l > 1) continue;
        diag[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }

  // sort pairs ascending by eigenvalue
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return diag[a] < diag[b]; });
  std::vector<double> d_sorted(n);
  DenseMatrix z_sorted(z.rows(), n);
  for (size_t c = 0; c < n; ++c) {
    d_sorted[c] = diag[order[c]];
    for (size_t r = 0; r < z.rows(); ++r) z_sorted(r, c) = z(r, order[c]);
  }
  diag = std::move(d_sorted);
  z = std::move(z_sorted);
}

// ---------------------------------------------------------------------------
// Lanczos with full reorthogonalization for the largest algebraic eigenpairs
// of a symmetric operator. The operator concept: size_t dim() and
// apply(const double* x, double* y) computing y = A x.
// ---------------------------------------------------------------------------

struct LanczosOptions {
  size_t max_iter = 0;  // Krylov dimension budget; 0 = dim of the operator
  double tol = 1e-6;    // bound on ||A u - theta u||_2 per returned pair
  uint64_t seed = 0x6d61647072ULL;
};

struct LanczosResult {
  std::vector<double> eigenvalues;  // descending algebraic, length m
  DenseMatrix vectors;              // n x m, column i pairs with eigenvalue i
  std::vector<double> residuals;    // ||A u - theta u||_2 per pair
  size_t iterations = 0;            // Krylov dimension used
};

namespace detail {

inline void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(a.data(), b.data(), a.size());
}

inline void orthogonalize(std::vector<double>& w,
                          const std::vector<std::vector<double>>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& v : basis) axpy(w, -vec_dot(v, w), v);
}

}  // namespace detail

template <class Op>
LanczosResult lanczos_largest(const Op& op, size_t m, LanczosOptions opt = {}) {
  size_t n = op.dim();
  if (n == 0) throw ValidationError("lanczos on an empty operator");
  m = std::min(m, n);
  size_t max_dim = opt.max_iter == 0 ? n : std::min(opt.max_iter, n);
  if (max_dim < m)
    throw ValidationError("lanczos max_iter smaller than requested pair count");

  CounterRng rng(opt.seed, 0);
  std::vector<std::vector<double>> basis;
  std::vector<double> alpha, beta;
  std::vector<double> w(n), tmp(n);

  auto random_unit = [&](uint64_t salt) {
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = rng.normal(salt * n + i);
    double norm = l2_norm(v.data(), n);
    for (auto& x : v) x /= norm;
    return v;
  };
  basis.push_back(random_unit(0));

  double scale = 1e-300;
  size_t restarts = 0;

  // Solves the projected problem and certifies candidates with true
  // residuals; returns a populated result only when every pair meets tol.
  auto try_finalize = [&](double b_next, bool force) -> LanczosResult {
    size_t dim = alpha.size();
    std::vector<double> d(alpha);
    std::vector<double> e(beta);
    DenseMatrix z(dim, dim);
    for (size_t i = 0; i < dim; ++i) z(i, i) = 1.0;
    tridiagonal_eig(d, e, z);
    size_t got = std::min(m, dim);
    // top algebraic = last columns after ascending sort
    if (!force) {
      for (size_t c = 0; c < got; ++c) {
        double bound = std::abs(b_next * z(dim - 1, dim - 1 - c));
        if (bound > 0.1 * opt.tol) return {};
      }
    }
    LanczosResult res;
    res.eigenvalues.resize(got);
    res.vectors = DenseMatrix(n, got);
    res.residuals.resize(got);
    res.iterations = dim;
    double worst = 0.0;
    std::vector<double> u(n);
    for (size_t c = 0; c < got; ++c) {
      size_t col = dim - 1 - c;
      res.eigenvalues[c] = d[col];
      for (size_t i = 0; i < n; ++i) u[i] = 0.0;
      for (size_t r = 0; r < dim; ++r) {
        double zc = z(r, col);
        const double* br = basis[r].data();
        for (size_t i = 0; i < n; ++i) u[i] += zc * br[i];
      }
      double un = l2_norm(u.data(), n);
      for (size_t i = 0; i < n; ++i) u[i] /= un;
      op.apply(u.data(), tmp.data());
      double theta = res.eigenvalues[c];
      double rsq = 0.0;
      for (size_t i = 0; i < n; ++i) {
        double r = tmp[i] - theta * u[i];
        rsq += r * r;
      }
      res.residuals[c] = std::sqrt(rsq);
      worst = std::max(worst, res.residuals[c]);
      for (size_t i = 0; i < n; ++i) res.vectors(i, c) = u[i];
    }
    if (worst <= opt.tol && got == m) return res;
    if (force)
      throw RuntimeError(
          "lanczos did not converge within " + std::to_string(dim) +
          " iterations; achieved residual " + std::to_string(worst) +
          " (tol " + std::to_string(opt.tol) + ")");
    return {};
  };

  for (size_t j = 0;; ++j) {
    op.apply(basis[j].data(), w.data());
    std::vector<double> wj(w);
    if (j > 0) detail::axpy(wj, -beta[j - 1], basis[j - 1]);
    double a = detail::vec_dot(basis[j], wj);
    alpha.push_back(a);
    detail::axpy(wj, -a, basis[j]);
    detail::orthogonalize(wj, basis);
    double b = l2_norm(wj.data(), n);
    scale = std::max({scale, std::abs(a), b, 1.0});

    size_t dim = alpha.size();
    bool at_cap = dim >= max_dim;
    bool breakdown = b <= 1e-12 * scale;
    size_t interval = std::max<size_t>(5, m / 4);
    bool check = dim >= m && (dim % interval == 0 || at_cap || breakdown);
    if (check) {
      auto res = try_finalize(b, /*force=*/at_cap);
      if (!res.eigenvalues.empty()) return res;
    }

    if (breakdown) {
      // Krylov space is invariant: deflate and continue in the orthogonal
      // complement with a fresh start vector (beta coupling = 0).
      std::vector<double> fresh = random_unit(1 + (++restarts));
      detail::orthogonalize(fresh, basis);
      double fb = l2_norm(fresh.data(), n);
      if (fb <= 1e-8) {
        // complement numerically exhausted
        return try_finalize(0.0, /*force=*/true);
      }
      for (auto& x : fresh) x /= fb;
      beta.push_back(0.0);
      basis.push_back(std::move(fresh));
    } else {
      for (auto& x : wj) x /= b;
      beta.push_back(b);
      basis.push_back(std::move(wj));
    }
  }
}

}  // namespace madpr
