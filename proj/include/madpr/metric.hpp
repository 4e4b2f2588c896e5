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

#include <cstdint>
#include <string>

#include "madpr/common.hpp"
#include "madpr/spectral_embedding.hpp"

namespace madpr {

enum class MetricKind : uint8_t { Euclidean = 0, Cosine = 1, Spectral = 2 };

inline const char* to_string(MetricKind k) {
  switch (k) {
    case MetricKind::Euclidean: return "euclidean";
    case MetricKind::Cosine: return "cosine";
    case MetricKind::Spectral: return "spectral";
  }
  return "?";
}

inline MetricKind metric_kind_from_string(const std::string& s) {
  if (s == "euclidean") return MetricKind::Euclidean;
  if (s == "cosine") return MetricKind::Cosine;
  if (s == "spectral") return MetricKind::Spectral;
  throw ValidationError("unknown metric \"" + s + "\"");
}

/// The d_KNN used for neighbor search and edge costs. The spectral variant
/// carries a non-owning reference to the embedding it measures in; the
/// referenced object must outlive the metric.
struct DistanceMetric {
  MetricKind kind = MetricKind::Euclidean;
  const SpectralEmbedding* spectral = nullptr;

  static DistanceMetric euclidean() { return {MetricKind::Euclidean, nullptr}; }
  static DistanceMetric cosine() { return {MetricKind::Cosine, nullptr}; }
  static DistanceMetric spectral_of(const SpectralEmbedding& s) {
    return {MetricKind::Spectral, &s};
  }

  void require_spectral(size_t n_rows) const {
    if (kind != MetricKind::Spectral) return;
    if (spectral == nullptr)
      throw ValidationError("spectral metric requires a spectral embedding");
    if (spectral->n_rows != n_rows)
      throw ValidationError(
          "spectral embedding has " + std::to_string(spectral->n_rows) +
          " rows but the corpus has " + std::to_string(n_rows));
  }
};

}  // namespace madpr
