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

#include <cmath>
#include <vector>

#include "madpr/dense.hpp"
#include "madpr/graph.hpp"

namespace madpr {

enum class LaplacianWeighting { Unit, Gaussian };

/// L_sym = I - D^{-1/2} W D^{-1/2} over the graph's edge structure, stored as
/// the normalized affinity P = D^{-1/2} W D^{-1/2} in CSR value order.
/// Affinities: w_ij = 1 (unit) or exp(-dist^2 / sigma^2) with dist taken from
/// the graph's DC edge costs (gaussian). Holds a non-owning reference to the
/// graph, which must outlive the operator.
class NormalizedLaplacian {
 public:
  NormalizedLaplacian(const ManifoldGraph& g, LaplacianWeighting weighting,
                      double sigma = 1.0)
      : g_(&g) {
    if (weighting == LaplacianWeighting::Gaussian) {
      if (g.cost_function() != CostFunction::DistanceCost)
        throw ValidationError(
            "gaussian laplacian weighting needs DC edge costs; the graph "
            "stores uniform costs");
      if (!(sigma > 0.0))
        throw ValidationError("gaussian weighting requires sigma > 0");
    }
    size_t n = static_cast<size_t>(g.n_vertices());
    std::vector<double> w(g.nnz());
    for (size_t e = 0; e < g.nnz(); ++e) {
      if (weighting == LaplacianWeighting::Unit) {
        w[e] = 1.0;
      } else {
        double d = static_cast<double>(g.costs()[e]);
        w[e] = std::exp(-(d * d) / (sigma * sigma));
      }
    }
    degree_.assign(n, 0.0);
    for (size_t v = 0; v < n; ++v) {
      auto [b, e] = edge_range(v);
      for (size_t i = b; i < e; ++i) degree_[v] += w[i];
      if (degree_[v] == 0.0)
        throw ValidationError("isolated vertex " + std::to_string(v) +
                              " has zero degree; raise k when building the "
                              "graph");
    }
    values_.resize(g.nnz());
    for (size_t v = 0; v < n; ++v) {
      auto [b, e] = edge_range(v);
      for (size_t i = b; i < e; ++i) {
        uint32_t u = g.neighbors()[i];
        values_[i] = w[i] / std::sqrt(degree_[v] * degree_[u]);
      }
    }
  }

  size_t dim() const { return static_cast<size_t>(g_->n_vertices()); }

  /// y = P x with P = D^{-1/2} W D^{-1/2}
  void apply_affinity(const double* x, double* y) const {
    size_t n = dim();
    for (size_t v = 0; v < n; ++v) {
      auto [b, e] = edge_range(v);
      double acc = 0.0;
      for (size_t i = b; i < e; ++i)
        acc += values_[i] * x[g_->neighbors()[i]];
      y[v] = acc;
    }
  }

  /// y = L_sym x = x - P x
  void apply(const double* x, double* y) const {
    apply_affinity(x, y);
    for (size_t v = 0; v < dim(); ++v) y[v] = x[v] - y[v];
  }

  const std::vector<double>& weighted_degrees() const { return degree_; }

  /// The trivial eigenvector of L_sym (eigenvalue 0 on a connected graph):
  /// the unit vector proportional to sqrt(degree).
  std::vector<double> sqrt_degree_unit() const {
    std::vector<double> v(dim());
    double norm_sq = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
      v[i] = std::sqrt(degree_[i]);
      norm_sq += degree_[i];
    }
    double norm = std::sqrt(norm_sq);
    for (auto& x : v) x /= norm;
    return v;
  }

  /// Dense materialization of L_sym for small-graph checks.
  DenseMatrix dense() const {
    size_t n = dim();
    DenseMatrix L(n, n);
    for (size_t v = 0; v < n; ++v) {
      L(v, v) = 1.0;
      auto [b, e] = edge_range(v);
      for (size_t i = b; i < e; ++i) L(v, g_->neighbors()[i]) = -values_[i];
    }
    return L;
  }

 private:
  std::pair<size_t, size_t> edge_range(size_t v) const {
    return {static_cast<size_t>(g_->offsets()[v]),
            static_cast<size_t>(g_->offsets()[v + 1])};
  }

  const ManifoldGraph* g_;
  std::vector<double> values_;  // P entries, CSR order
  std::vector<double> degree_;  // weighted degrees
};

inline NormalizedLaplacian build_normalized_laplacian(
    const ManifoldGraph& g, LaplacianWeighting weighting, double sigma = 1.0) {
  return NormalizedLaplacian(g, weighting, sigma);
}

}  // namespace madpr
