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
#include <optional>
#include <vector>

#include "madpr/embedding.hpp"
#include "madpr/metric.hpp"

namespace madpr {

struct Neighbor {
  uint32_t index;
  double distance;
};

/// Keeps the k smallest (key, index) pairs seen. Ties at equal key resolve to
/// the smaller index, which makes every KNN result order-independent.
class BoundedNeighborHeap {
 public:
  explicit BoundedNeighborHeap(size_t cap) : cap_(cap) { heap_.reserve(cap); }

  void offer(double key, uint32_t index) {
    if (heap_.size() < cap_) {
      heap_.emplace_back(key, index);
      std::push_heap(heap_.begin(), heap_.end());
      return;
    }
    if (std::pair<double, uint32_t>(key, index) < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = {key, index};
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  bool full() const { return heap_.size() == cap_; }
  double worst_key() const { return heap_.front().first; }
  size_t size() const { return heap_.size(); }

  /// Extracts (key, index) pairs ascending by (key, index).
  std::vector<std::pair<double, uint32_t>> sorted() const {
    auto out = heap_;
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  size_t cap_;
  std::vector<std::pair<double, uint32_t>> heap_;
};

namespace detail {

// Scans all rows of a row-major buffer against one probe with the selected
// key function, keeping the k nearest. `sq` keys hold squared distances.
template <class T, class KeyFn>
std::vector<std::pair<double, uint32_t>> scan_k_nearest(
    const T* data, size_t n, size_t dims, size_t k,
    std::optional<uint32_t> exclude, KeyFn&& key) {
  BoundedNeighborHeap heap(k);
  for (size_t j = 0; j < n; ++j) {
    if (exclude && *exclude == j) continue;
    heap.offer(key(data + j * dims, j), static_cast<uint32_t>(j));
  }
  return heap.sorted();
}

}  // namespace detail

/// Exact brute-force k-nearest-neighbor query, ascending by distance with
/// ties broken by ascending index. Returns min(k, N - excluded) entries.
/// The probe lives in the metric's space: raw D for euclidean/cosine.
inline std::vector<Neighbor> knn_query(const EmbeddingMatrix& m,
                                       std::span<const float> probe, size_t k,
                                       const DistanceMetric& metric,
                                       std::optional<uint32_t> exclude = {}) {
  if (k < 1) throw ValidationError("knn_query requires k >= 1");
  if (metric.kind == MetricKind::Spectral)
    throw ValidationError(
        "spectral knn_query takes a probe in the spectral space (R^M)");
  check_same_dims(probe.size(), m.n_dims());
  std::vector<std::pair<double, uint32_t>> hits;
  if (metric.kind == MetricKind::Euclidean) {
    hits = detail::scan_k_nearest(
        m.data().data(), m.n_rows(), m.n_dims(), k, exclude,
        [&](const float* row, size_t) {
          return squared_l2(probe.data(), row, probe.size());
        });
    for (auto& h : hits) h.first = std::sqrt(h.first);
  } else {
    double pn = l2_norm(probe.data(), probe.size());
    if (pn == 0.0)
      throw ValidationError("cosine knn_query with zero-norm probe");
    hits = detail::scan_k_nearest(
        m.data().data(), m.n_rows(), m.n_dims(), k, exclude,
        [&](const float* row, size_t j) {
          double rn = m.row_norm(j);
          if (rn == 0.0)
            throw ValidationError("cosine distance undefined for zero-norm row \"" +
                                  m.id(j) + "\"");
          return 1.0 - dot(probe.data(), row, probe.size()) / (pn * rn);
        });
  }
  std::vector<Neighbor> out;
  out.reserve(hits.size());
  for (auto& [d, i] : hits) out.push_back({i, d});
  return out;
}

/// Spectral-space variant: probe in R^M, distances over the embedding rows.
inline std::vector<Neighbor> knn_query(const EmbeddingMatrix& m,
                                       std::span<const double> probe, size_t k,
                                       const DistanceMetric& metric,
                                       std::optional<uint32_t> exclude = {}) {
  if (k < 1) throw ValidationError("knn_query requires k >= 1");
  if (metric.kind != MetricKind::Spectral)
    throw ValidationError("double-precision probe requires the spectral metric");
  metric.require_spectral(m.n_rows());
  const SpectralEmbedding& s = *metric.spectral;
  check_same_dims(probe.size(), s.n_dims);
  auto hits = detail::scan_k_nearest(
      s.coords.data(), s.n_rows, s.n_dims, k, exclude,
      [&](const double* row, size_t) {
        return squared_l2(probe.data(), row, probe.size());
      });
  std::vector<Neighbor> out;
  out.reserve(hits.size());
  for (auto& [d, i] : hits) out.push_back({i, std::sqrt(d)});
  return out;
}

}  // namespace madpr
