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
#include <vector>

#include "madpr/knn.hpp"
#include "madpr/lanczos.hpp"
#include "madpr/laplacian.hpp"
#include "madpr/spectral_embedding.hpp"

namespace madpr {

struct SpectralOptions {
  LaplacianWeighting weighting = LaplacianWeighting::Unit;
  double sigma = 1.0;      // gaussian bandwidth, if selected
  double tol = 1e-6;       // eigenpair residual bound
  size_t max_iter = 0;     // Lanczos budget; 0 = graph size
  uint64_t seed = 0x6d61647072ULL;
};

namespace detail {

struct AffinityOperator {
  const NormalizedLaplacian* lap;
  size_t dim() const { return lap->dim(); }
  void apply(const double* x, double* y) const { lap->apply_affinity(x, y); }
};

}  // namespace detail

/// Coordinates from the m smallest non-trivial eigenpairs of L_sym. Solved
/// as the largest eigenpairs of the affinity P = D^{-1/2} W D^{-1/2} (only
/// sparse matvecs needed); lambda_L = 1 - lambda_P. The trivial pair
/// (lambda ~ 0, eigenvector ~ sqrt(degree)) is detected and excluded.
/// Requires a connected graph: spectral coordinates across components are
/// incomparable, so disconnected inputs are an error rather than a silent
/// per-component embed.
inline SpectralEmbedding spectral_embed(const ManifoldGraph& g, size_t m,
                                        const SpectralOptions& opt = {}) {
  size_t n = static_cast<size_t>(g.n_vertices());
  if (n < 2) throw ValidationError("spectral embedding needs at least 2 vertices");
  if (m < 1) throw ValidationError("spectral dimension must be >= 1");
  {
    std::vector<uint32_t> labels;
    size_t comps = connected_components(g, labels);
    if (comps > 1)
      throw ValidationError(
          "graph has " + std::to_string(comps) +
          " connected components; spectral coordinates are incomparable "
          "across components — raise k when building the graph");
  }
  if (m > n - 1) {
    log_warn("spectral dimension " + std::to_string(m) + " clamped to N-1=" +
             std::to_string(n - 1));
    m = n - 1;
  }

  NormalizedLaplacian lap(g, opt.weighting, opt.sigma);
  detail::AffinityOperator op{&lap};
  LanczosOptions lopt;
  lopt.tol = opt.tol;
  lopt.max_iter = opt.max_iter;
  lopt.seed = opt.seed;
  // one extra pair to cover the trivial eigenvector of the connected graph
  size_t want = std::min(m + 1, n);
  LanczosResult eig = lanczos_largest(op, want, lopt);

  // Identify the trivial pair: lambda_L below threshold AND aligned with the
  // sqrt-degree direction.
  std::vector<double> sqrt_deg = lap.sqrt_degree_unit();
  std::vector<size_t> keep;
  for (size_t c = 0; c < eig.eigenvalues.size(); ++c) {
    double lambda_l = 1.0 - eig.eigenvalues[c];
    double cos_triv = 0.0;
    for (size_t i = 0; i < n; ++i) cos_triv += eig.vectors(i, c) * sqrt_deg[i];
    bool trivial = lambda_l < 1e-8 && std::abs(cos_triv) > 0.999;
    if (!trivial) keep.push_back(c);
  }
  if (keep.size() < m) {
    // trivial pair not present among the computed ones (should not happen on
    // a connected graph); fall back to the smallest available
    log_warn("trivial eigenpair not identified; keeping smallest spectrum slice");
    keep.clear();
    for (size_t c = 0; c < eig.eigenvalues.size() && keep.size() < m; ++c)
      keep.push_back(c);
  }
  keep.resize(m);
  // eig is descending in lambda_P, i.e. ascending in lambda_L; preserve order
  SpectralEmbedding s;
  s.n_rows = n;
  s.n_dims = m;
  s.base_graph_fingerprint = g.fingerprint();
  s.eigenvalues.resize(m);
  s.coords.resize(n * m);
  for (size_t outc = 0; outc < m; ++outc) {
    size_t c = keep[outc];
    s.eigenvalues[outc] = 1.0 - eig.eigenvalues[c];
    for (size_t i = 0; i < n; ++i) s.coords[i * m + outc] = eig.vectors(i, c);
  }
  return s;
}

/// Out-of-sample coordinates for a raw-space query: the inverse-distance
/// weighted average of the spectral rows of the query's k euclidean nearest
/// passages (weights 1/(1e-9 + dist), normalized). An exact corpus match at
/// k=1 returns that row unchanged.
inline std::vector<double> extend_query(const SpectralEmbedding& s,
                                        const EmbeddingMatrix& base,
                                        std::span<const float> q, size_t k) {
  if (k < 1) throw ValidationError("extend_query requires k >= 1");
  if (s.n_rows != base.n_rows())
    throw ValidationError("spectral embedding does not match the base corpus");
  auto neighbors = knn_query(base, q, k, DistanceMetric::euclidean());
  constexpr double kEps = 1e-9;
  double total = 0.0;
  std::vector<double> out(s.n_dims, 0.0);
  for (const auto& nb : neighbors) total += 1.0 / (kEps + nb.distance);
  for (const auto& nb : neighbors) {
    double w = (1.0 / (kEps + nb.distance)) / total;
    const double* row = s.row(nb.index);
    for (size_t c = 0; c < s.n_dims; ++c) out[c] += w * row[c];
  }
  return out;
}

}  // namespace madpr
