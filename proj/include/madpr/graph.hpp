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
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "madpr/knn.hpp"
#include "madpr/parallel.hpp"

namespace madpr {

enum class CostFunction : uint8_t { DistanceCost = 0, UniformCost = 1 };

inline const char* to_string(CostFunction c) {
  return c == CostFunction::DistanceCost ? "dc" : "uc";
}

inline CostFunction cost_function_from_string(const std::string& s) {
  if (s == "dc" || s == "distance") return CostFunction::DistanceCost;
  if (s == "uc" || s == "uniform") return CostFunction::UniformCost;
  throw ValidationError("unknown cost function \"" + s + "\"");
}

/// Symmetrized weighted KNN graph in CSR form. An undirected edge {i, j}
/// exists iff i is among the k nearest neighbors of j or vice versa; both
/// directions carry the same cost. Immutable once built.
class ManifoldGraph {
 public:
  ManifoldGraph() = default;
  ManifoldGraph(uint64_t n, std::vector<uint64_t> offsets,
                std::vector<uint32_t> neighbors, std::vector<float> costs,
                uint32_t k, MetricKind metric, CostFunction cost)
      : n_(n),
        offsets_(std::move(offsets)),
        neighbors_(std::move(neighbors)),
        costs_(std::move(costs)),
        k_(k),
        metric_(metric),
        cost_(cost) {
    validate();
  }

  uint64_t n_vertices() const { return n_; }
  uint64_t nnz() const { return neighbors_.size(); }
  uint32_t k() const { return k_; }
  MetricKind metric_kind() const { return metric_; }
  CostFunction cost_function() const { return cost_; }
  const std::vector<uint64_t>& offsets() const { return offsets_; }
  const std::vector<uint32_t>& neighbors() const { return neighbors_; }
  const std::vector<float>& costs() const { return costs_; }
  uint64_t degree(size_t v) const { return offsets_[v + 1] - offsets_[v]; }

  std::span<const uint32_t> adjacent(size_t v) const {
    return {neighbors_.data() + offsets_[v],
            static_cast<size_t>(degree(v))};
  }
  std::span<const float> adjacent_costs(size_t v) const {
    return {costs_.data() + offsets_[v], static_cast<size_t>(degree(v))};
  }

  uint64_t fingerprint() const {
    Fnv1a64 h;
    h.update_string("gph");
    h.update_u64(n_);
    h.update_u64(nnz());
    h.update_u32(k_);
    h.update_u64(static_cast<uint64_t>(metric_));
    h.update_u64(static_cast<uint64_t>(cost_));
    h.update_span(offsets_);
    h.update_span(neighbors_);
    h.update_span(costs_);
    return h.digest();
  }

  void validate() const {
    if (offsets_.size() != n_ + 1 || offsets_.front() != 0 ||
        offsets_.back() != neighbors_.size() ||
        neighbors_.size() != costs_.size() ||
        !std::is_sorted(offsets_.begin(), offsets_.end()))
      throw ValidationError("corrupt CSR: offsets inconsistent with arrays");
    for (size_t v = 0; v < n_; ++v) {
      auto adj = adjacent(v);
      auto adj_costs = adjacent_costs(v);
      for (size_t e = 0; e < adj.size(); ++e) {
        uint32_t u = adj[e];
        if (u >= n_) throw ValidationError("corrupt CSR: neighbor index out of range");
        if (u == v) throw ValidationError("corrupt CSR: self-loop at vertex " +
                                          std::to_string(v));
        if (e > 0 && adj[e] <= adj[e - 1])
          throw ValidationError("corrupt CSR: adjacency not strictly ascending");
        float c = adj_costs[e];
        if (!std::isfinite(c) || c < 0.0f)
          throw ValidationError("corrupt CSR: invalid edge cost");
        if (cost_ == CostFunction::UniformCost && c != 1.0f)
          throw ValidationError("corrupt CSR: uniform-cost edge differs from 1");
        // mirror edge with identical cost
        auto mirror = adjacent(u);
        auto it = std::lower_bound(mirror.begin(), mirror.end(),
                                   static_cast<uint32_t>(v));
        if (it == mirror.end() || *it != v)
          throw ValidationError("corrupt CSR: missing mirror edge");
        if (adjacent_costs(u)[static_cast<size_t>(it - mirror.begin())] != c)
          throw ValidationError("corrupt CSR: asymmetric edge cost");
      }
    }
  }

 private:
  uint64_t n_ = 0;
  std::vector<uint64_t> offsets_{0};
  std::vector<uint32_t> neighbors_;
  std::vector<float> costs_;
  uint32_t k_ = 0;
  MetricKind metric_ = MetricKind::Euclidean;
  CostFunction cost_ = CostFunction::DistanceCost;
};

// ---------------------------------------------------------------------------
// KNN table: per-row nearest-neighbor lists, reusable across k and cost
// choices (the k-NN list is a prefix of the k_max-NN list).
// ---------------------------------------------------------------------------

struct KnnTable {
  size_t n = 0;
  size_t width = 0;  // min(k_max, n - 1)
  MetricKind metric = MetricKind::Euclidean;
  std::vector<uint32_t> neighbors;  // n x width
  std::vector<double> distances;    // n x width, ascending per row
};

namespace detail {

// Heap keys are squared distances for euclidean/spectral (monotone) and
// cosine distances for cosine; keys convert to true distances at extraction.
// The scan runs on f64 rows (f32 input is widened once beforehand). The
// single-worker pass walks the upper triangle in L2-sized column blocks with
// the x4 blocked kernel; the multi-worker pass partitions rows. Both paths
// key every pair with bit-identical arithmetic, so the resulting table does
// not depend on the thread count.
class KnnScanner {
 public:
  KnnScanner(const double* data, size_t n, size_t dims,
             const std::vector<double>* norms, MetricKind metric)
      : data_(data), n_(n), dims_(dims), norms_(norms), metric_(metric) {}

  KnnTable run(size_t width, unsigned threads) const {
    std::vector<BoundedNeighborHeap> heaps(n_, BoundedNeighborHeap(width));
    if (resolve_threads(threads) <= 1) {
      triangle_pass(heaps);
    } else {
      parallel_for_chunks(n_, threads, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) row_scan(i, heaps[i]);
      });
    }
    KnnTable t;
    t.n = n_;
    t.width = width;
    t.metric = metric_;
    t.neighbors.resize(n_ * width);
    t.distances.resize(n_ * width);
    bool squared = metric_ != MetricKind::Cosine;
    for (size_t i = 0; i < n_; ++i) {
      auto sorted = heaps[i].sorted();
      for (size_t e = 0; e < width; ++e) {
        t.neighbors[i * width + e] = sorted[e].second;
        t.distances[i * width + e] =
            squared ? std::sqrt(sorted[e].first) : sorted[e].first;
      }
    }
    return t;
  }

 private:
  const double* row(size_t i) const { return data_ + i * dims_; }

  double cosine_key(size_t i, size_t j) const {
    double ni = (*norms_)[i], nj = (*norms_)[j];
    if (ni == 0.0 || nj == 0.0)
      throw ValidationError("cosine distance undefined for zero-norm row " +
                            std::to_string(ni == 0.0 ? i : j));
    return 1.0 - dot(row(i), row(j), dims_) / (ni * nj);
  }

  void triangle_pass(std::vector<BoundedNeighborHeap>& heaps) const {
    size_t block =
        std::clamp<size_t>((1u << 20) / (dims_ * sizeof(double)), 16, 8192);
    for (size_t jb = 0; jb < n_; jb += block) {
      size_t je = std::min(n_, jb + block);
      for (size_t i = 0; i + 1 < je; ++i) {
        size_t j = std::max(jb, i + 1);
        if (metric_ == MetricKind::Cosine) {
          for (; j < je; ++j) {
            double key = cosine_key(i, j);
            heaps[i].offer(key, static_cast<uint32_t>(j));
            heaps[j].offer(key, static_cast<uint32_t>(i));
          }
          continue;
        }
        const double* ai = row(i);
        double out[4];
        for (; j + 4 <= je; j += 4) {
          squared_l2_x4(ai, row(j), row(j + 1), row(j + 2), row(j + 3), dims_,
                        out);
          for (size_t t = 0; t < 4; ++t) {
            heaps[i].offer(out[t], static_cast<uint32_t>(j + t));
            heaps[j + t].offer(out[t], static_cast<uint32_t>(i));
          }
        }
        for (; j < je; ++j) {
          double key = squared_l2(ai, row(j), dims_);
          heaps[i].offer(key, static_cast<uint32_t>(j));
          heaps[j].offer(key, static_cast<uint32_t>(i));
        }
      }
    }
  }

  void row_scan(size_t i, BoundedNeighborHeap& heap) const {
    if (metric_ == MetricKind::Cosine) {
      for (size_t j = 0; j < n_; ++j)
        if (j != i) heap.offer(cosine_key(i, j), static_cast<uint32_t>(j));
      return;
    }
    const double* ai = row(i);
    auto scan_range = [&](size_t j, size_t end) {
      double out[4];
      for (; j + 4 <= end; j += 4) {
        squared_l2_x4(ai, row(j), row(j + 1), row(j + 2), row(j + 3), dims_,
                      out);
        for (size_t t = 0; t < 4; ++t)
          heap.offer(out[t], static_cast<uint32_t>(j + t));
      }
      for (; j < end; ++j)
        heap.offer(squared_l2(ai, row(j), dims_), static_cast<uint32_t>(j));
    };
    scan_range(0, i);
    scan_range(i + 1, n_);
  }

  const double* data_;
  size_t n_;
  size_t dims_;
  const std::vector<double>* norms_;
  MetricKind metric_;
};

}  // namespace detail

/// Exact KNN lists for every row under the metric. k is clamped to N-1.
inline KnnTable build_knn_table(const EmbeddingMatrix& m, size_t k,
                                const DistanceMetric& metric,
                                unsigned threads = 0) {
  size_t n = m.n_rows();
  if (n < 2) throw ValidationError("KNN graph requires at least 2 rows");
  if (k < 1) throw ValidationError("KNN requires k >= 1");
  size_t width = k;
  if (width > n - 1) {
    log_warn("k=" + std::to_string(k) + " clamped to N-1=" +
             std::to_string(n - 1));
    width = n - 1;
  }
  metric.require_spectral(n);
  if (metric.kind == MetricKind::Spectral) {
    detail::KnnScanner scanner(metric.spectral->coords.data(), n,
                               metric.spectral->n_dims, nullptr,
                               MetricKind::Spectral);
    return scanner.run(width, threads);
  }
  // Widen the matrix once: f32 -> f64 conversion is exact and the kernels
  // share one summation order, so the O(N^2) pass produces the same
  // distances as per-pair f32 evaluation while skipping the conversions.
  std::vector<double> widened(m.data().size());
  for (size_t i = 0; i < widened.size(); ++i)
    widened[i] = static_cast<double>(m.data()[i]);
  detail::KnnScanner scanner(widened.data(), n, m.n_dims(), &m.row_norms(),
                             metric.kind);
  return scanner.run(width, threads);
}

/// Symmetric closure of the first k columns of the table, assembled into CSR
/// with DC (metric distance) or UC (constant 1) edge costs.
inline ManifoldGraph assemble_graph(const KnnTable& t, size_t k,
                                    CostFunction cost) {
  if (k < 1 || k > t.width)
    throw ValidationError("assemble_graph: k out of table range");
  struct Directed {
    uint32_t row, col;
    double dist;
  };
  std::vector<Directed> entries;
  entries.reserve(2 * t.n * k);
  for (size_t i = 0; i < t.n; ++i) {
    for (size_t e = 0; e < k; ++e) {
      uint32_t j = t.neighbors[i * t.width + e];
      double d = t.distances[i * t.width + e];
      entries.push_back({static_cast<uint32_t>(i), j, d});
      entries.push_back({j, static_cast<uint32_t>(i), d});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Directed& a, const Directed& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  std::vector<uint64_t> offsets(t.n + 1, 0);
  std::vector<uint32_t> neighbors;
  std::vector<float> costs;
  neighbors.reserve(entries.size());
  costs.reserve(entries.size());
  for (size_t e = 0; e < entries.size(); ++e) {
    if (e > 0 && entries[e].row == entries[e - 1].row &&
        entries[e].col == entries[e - 1].col)
      continue;  // duplicate direction from mutual-KNN
    offsets[entries[e].row + 1]++;
    neighbors.push_back(entries[e].col);
    costs.push_back(cost == CostFunction::UniformCost
                        ? 1.0f
                        : static_cast<float>(entries[e].dist));
  }
  for (size_t v = 0; v < t.n; ++v) offsets[v + 1] += offsets[v];
  return ManifoldGraph(t.n, std::move(offsets), std::move(neighbors),
                       std::move(costs), static_cast<uint32_t>(k), t.metric,
                       cost);
}

/// Builds G = (V, E, c): edges connect each vertex to its k nearest
/// neighbors under the metric, symmetrized; costs per the cost function.
inline ManifoldGraph build_knn_graph(const EmbeddingMatrix& m, size_t k,
                                     const DistanceMetric& metric,
                                     CostFunction cost, unsigned threads = 0) {
  KnnTable t = build_knn_table(m, k, metric, threads);
  return assemble_graph(t, t.width, cost);
}

// ---------------------------------------------------------------------------
// Persistence: magic "MADPRGPH", u32 version=1, u64 N, u64 nnz, u8 metric,
// u8 cost, u32 k, offsets (N+1 x u64), neighbors (nnz x u32),
// costs (nnz x f32), little-endian.
// ---------------------------------------------------------------------------

inline void save_graph(const ManifoldGraph& g, const std::string& path) {
  BinaryWriter w(path);
  w.magic("MADPRGPH");
  w.u32(1);
  w.u64(g.n_vertices());
  w.u64(g.nnz());
  w.u8(static_cast<uint8_t>(g.metric_kind()));
  w.u8(static_cast<uint8_t>(g.cost_function()));
  w.u32(g.k());
  w.array(g.offsets());
  w.array(g.neighbors());
  w.array(g.costs());
  w.close();
}

inline ManifoldGraph load_graph(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("MADPRGPH");
  uint32_t version = r.u32();
  if (version != 1)
    throw ValidationError("unsupported graph container version in " + path);
  uint64_t n = r.u64();
  uint64_t nnz = r.u64();
  uint8_t metric = r.u8();
  uint8_t cost = r.u8();
  if (metric > 2 || cost > 1)
    throw ValidationError("invalid metric/cost tag in " + path);
  uint32_t k = r.u32();
  std::vector<uint64_t> offsets;
  std::vector<uint32_t> neighbors;
  std::vector<float> costs;
  r.array(offsets, static_cast<size_t>(n) + 1);
  if (offsets.back() != nnz)
    throw ValidationError("corrupt CSR: offsets[N] != nnz in " + path);
  r.array(neighbors, static_cast<size_t>(nnz));
  r.array(costs, static_cast<size_t>(nnz));
  return ManifoldGraph(n, std::move(offsets), std::move(neighbors),
                       std::move(costs), k, static_cast<MetricKind>(metric),
                       static_cast<CostFunction>(cost));
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct DegreeStats {
  std::vector<uint64_t> degrees;
  double mean = 0.0;
  uint64_t min = 0;
  uint64_t max = 0;

  /// Nearest-rank percentile of the degree distribution, p in [0, 100].
  double percentile(double p) const {
    if (degrees.empty()) return 0.0;
    auto sorted = degrees;
    std::sort(sorted.begin(), sorted.end());
    double rank = std::ceil(p / 100.0 * static_cast<double>(sorted.size()));
    size_t idx = rank <= 1.0 ? 0 : static_cast<size_t>(rank) - 1;
    return static_cast<double>(sorted[std::min(idx, sorted.size() - 1)]);
  }
};

inline DegreeStats degree_stats(const ManifoldGraph& g) {
  DegreeStats s;
  s.degrees.resize(g.n_vertices());
  uint64_t total = 0;
  for (size_t v = 0; v < g.n_vertices(); ++v) {
    s.degrees[v] = g.degree(v);
    total += s.degrees[v];
  }
  if (!s.degrees.empty()) {
    s.mean = static_cast<double>(total) / static_cast<double>(s.degrees.size());
    s.min = *std::min_element(s.degrees.begin(), s.degrees.end());
    s.max = *std::max_element(s.degrees.begin(), s.degrees.end());
  }
  return s;
}

/// Labels each vertex with its connected component; returns the count.
inline size_t connected_components(const ManifoldGraph& g,
                                   std::vector<uint32_t>& labels) {
  size_t n = static_cast<size_t>(g.n_vertices());
  labels.assign(n, UINT32_MAX);
  size_t count = 0;
  std::deque<uint32_t> queue;
  for (size_t start = 0; start < n; ++start) {
    if (labels[start] != UINT32_MAX) continue;
    labels[start] = static_cast<uint32_t>(count);
    queue.push_back(static_cast<uint32_t>(start));
    while (!queue.empty()) {
      uint32_t v = queue.front();
      queue.pop_front();
      for (uint32_t u : g.adjacent(v)) {
        if (labels[u] == UINT32_MAX) {
          labels[u] = static_cast<uint32_t>(count);
          queue.push_back(u);
        }
      }
    }
    ++count;
  }
  return count;
}

inline bool is_connected(const ManifoldGraph& g) {
  std::vector<uint32_t> labels;
  return connected_components(g, labels) <= 1;
}

}  // namespace madpr
