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
#include <cstdint>
#include <span>
#include <vector>

#include "madpr/common.hpp"
#include "madpr/distance.hpp"

namespace madpr {

/// N x M spectral coordinates: row i holds the coordinates of passage i in
/// the eigenvector basis of the normalized graph Laplacian. Eigenvalues are
/// the ascending non-trivial spectrum slice the columns correspond to.
struct SpectralEmbedding {
  size_t n_rows = 0;
  size_t n_dims = 0;
  std::vector<double> coords;       // row-major N x M
  std::vector<double> eigenvalues;  // length M, ascending
  uint64_t base_graph_fingerprint = 0;

  const double* row(size_t i) const { return coords.data() + i * n_dims; }
  std::span<const double> row_span(size_t i) const { return {row(i), n_dims}; }

  uint64_t fingerprint() const {
    Fnv1a64 h;
    h.update_string("spc");
    h.update_u64(n_rows);
    h.update_u64(n_dims);
    h.update_u64(base_graph_fingerprint);
    h.update_span(eigenvalues);
    h.update_span(coords);
    return h.digest();
  }
};

/// ||u_i - u_j||_2 between spectral rows.
inline double spectral_distance(const SpectralEmbedding& s, size_t i, size_t j) {
  if (i >= s.n_rows || j >= s.n_rows)
    throw ValidationError("spectral_distance index out of range");
  return std::sqrt(squared_l2(s.row(i), s.row(j), s.n_dims));
}

// Container: magic "MADPRSPC", u32 version=1, u64 N, u32 M, u32 dtype
// (1 = f64), u64 base graph fingerprint, M f64 eigenvalues, N*M f64 coords.
// Coordinates stay f64 so eigenpair residuals survive a round trip.

inline void save_spectral(const SpectralEmbedding& s, const std::string& path) {
  BinaryWriter w(path);
  w.magic("MADPRSPC");
  w.u32(1);
  w.u64(s.n_rows);
  w.u32(static_cast<uint32_t>(s.n_dims));
  w.u32(1);  // dtype f64
  w.u64(s.base_graph_fingerprint);
  w.array(s.eigenvalues);
  w.array(s.coords);
  w.close();
}

inline SpectralEmbedding load_spectral(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("MADPRSPC");
  uint32_t version = r.u32();
  if (version != 1)
    throw ValidationError("unsupported spectral container version in " + path);
  SpectralEmbedding s;
  s.n_rows = static_cast<size_t>(r.u64());
  s.n_dims = r.u32();
  uint32_t dtype = r.u32();
  if (dtype != 1)
    throw ValidationError("unsupported dtype code in " + path);
  s.base_graph_fingerprint = r.u64();
  r.array(s.eigenvalues, s.n_dims);
  r.array(s.coords, s.n_rows * s.n_dims);
  for (double v : s.coords)
    if (!std::isfinite(v))
      throw ValidationError("non-finite spectral coordinate in " + path);
  return s;
}

}  // namespace madpr
