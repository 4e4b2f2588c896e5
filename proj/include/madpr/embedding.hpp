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
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "madpr/common.hpp"
#include "madpr/distance.hpp"

namespace madpr {

constexpr double kUnitNormTolerance = 1e-5;

/// Immutable row-major matrix of f32 embeddings with one string id per row.
/// Rows are validated (finite, unique ids) at construction and never mutated
/// afterwards, so instances are safe to share across threads.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(size_t n_rows, size_t n_dims, std::vector<float> data,
                  std::vector<std::string> ids)
      : n_rows_(n_rows),
        n_dims_(n_dims),
        data_(std::move(data)),
        ids_(std::move(ids)) {
    validate();
    compute_norms();
  }

  size_t n_rows() const { return n_rows_; }
  size_t n_dims() const { return n_dims_; }
  const std::vector<float>& data() const { return data_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(size_t i) const { return ids_[i]; }
  const float* row(size_t i) const { return data_.data() + i * n_dims_; }
  std::span<const float> row_span(size_t i) const { return {row(i), n_dims_}; }
  double row_norm(size_t i) const { return row_norms_[i]; }
  const std::vector<double>& row_norms() const { return row_norms_; }
  bool normalized() const { return normalized_; }

  uint64_t fingerprint() const {
    Fnv1a64 h;
    h.update_string("emb");
    h.update_u64(n_rows_);
    h.update_u64(n_dims_);
    h.update_span(data_);
    for (const auto& id : ids_) {
      h.update_string(id);
      h.update("\n", 1);
    }
    return h.digest();
  }

 private:
  void validate() const {
    if (ids_.size() != n_rows_)
      throw ValidationError("id count " + std::to_string(ids_.size()) +
                            " does not match row count " +
                            std::to_string(n_rows_));
    if (data_.size() != n_rows_ * n_dims_)
      throw ValidationError("data size does not match N x D");
    std::unordered_set<std::string_view> seen;
    seen.reserve(n_rows_);
    for (const auto& id : ids_) {
      if (!seen.insert(id).second)
        throw ValidationError("duplicate id \"" + id + "\"");
    }
    for (size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i]))
        throw ValidationError("non-finite value at row " +
                              std::to_string(i / n_dims_) + ", dim " +
                              std::to_string(i % n_dims_));
    }
  }

  void compute_norms() {
    row_norms_.resize(n_rows_);
    normalized_ = n_rows_ > 0;
    for (size_t i = 0; i < n_rows_; ++i) {
      row_norms_[i] = l2_norm(row(i), n_dims_);
      if (std::abs(row_norms_[i] - 1.0) > kUnitNormTolerance)
        normalized_ = false;
    }
  }

  size_t n_rows_ = 0;
  size_t n_dims_ = 0;
  std::vector<float> data_;
  std::vector<std::string> ids_;
  std::vector<double> row_norms_;
  bool normalized_ = false;
};

/// Divides every row by its l2 norm. A zero-norm row is an error naming the
/// offending id (cosine distance is undefined there).
inline EmbeddingMatrix normalize_l2(const EmbeddingMatrix& m) {
  std::vector<float> data(m.data());
  for (size_t i = 0; i < m.n_rows(); ++i) {
    double norm = m.row_norm(i);
    if (norm == 0.0)
      throw ValidationError("cannot normalize zero-norm row \"" + m.id(i) +
                            "\"");
    float* row = data.data() + i * m.n_dims();
    for (size_t c = 0; c < m.n_dims(); ++c)
      row[c] = static_cast<float>(static_cast<double>(row[c]) / norm);
  }
  return EmbeddingMatrix(m.n_rows(), m.n_dims(), std::move(data),
                         std::vector<std::string>(m.ids()));
}

// ---------------------------------------------------------------------------
// Binary container: magic "MADPREMB", u32 version=1, u64 N, u32 D,
// u32 dtype (0 = f32), then N*D f32 row-major, all little-endian.
// Ids live in a sidecar file at <path>.ids, one UTF-8 id per line.
// ---------------------------------------------------------------------------

enum class EmbeddingFormat { Binary, Csv };

namespace detail {

inline std::vector<std::string> read_id_sidecar(const std::string& path,
                                                size_t expected) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open id sidecar: " + path);
  std::vector<std::string> ids;
  ids.reserve(expected);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ids.push_back(line);
  }
  if (ids.size() != expected)
    throw ValidationError("id sidecar " + path + " has " +
                          std::to_string(ids.size()) + " lines, expected " +
                          std::to_string(expected));
  return ids;
}

}  // namespace detail

inline void write_embeddings(const EmbeddingMatrix& m, const std::string& path) {
  BinaryWriter w(path);
  w.magic("MADPREMB");
  w.u32(1);
  w.u64(m.n_rows());
  w.u32(static_cast<uint32_t>(m.n_dims()));
  w.u32(0);  // dtype f32
  w.array(m.data());
  w.close();
  std::ofstream ids(path + ".ids", std::ios::binary);
  if (!ids) throw RuntimeError("cannot open for writing: " + path + ".ids");
  for (const auto& id : m.ids()) ids << id << '\n';
  if (!ids) throw RuntimeError("write failed: " + path + ".ids");
}

inline EmbeddingMatrix load_embeddings_binary(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("MADPREMB");
  uint32_t version = r.u32();
  if (version != 1)
    throw ValidationError("unsupported embedding container version " +
                          std::to_string(version) + " in " + path);
  uint64_t n = r.u64();
  uint32_t d = r.u32();
  uint32_t dtype = r.u32();
  if (dtype != 0)
    throw ValidationError("unsupported dtype code " + std::to_string(dtype) +
                          " in " + path);
  std::vector<float> data;
  r.array(data, static_cast<size_t>(n) * d);
  if (!r.at_eof()) log_warn("trailing bytes ignored in " + path);
  auto ids = detail::read_id_sidecar(path + ".ids", static_cast<size_t>(n));
  return EmbeddingMatrix(static_cast<size_t>(n), d, std::move(data),
                         std::move(ids));
}

/// CSV format: header "id,dim0,...,dim{D-1}", one row per passage.
inline EmbeddingMatrix load_embeddings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("empty CSV file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  size_t dims = 0;
  {
    std::stringstream header(line);
    std::string cell;
    if (!std::getline(header, cell, ',') || cell != "id")
      throw ValidationError("malformed header in " + path +
                            ": first column must be \"id\"");
    while (std::getline(header, cell, ',')) ++dims;
    if (dims == 0) throw ValidationError("header declares no dimensions");
  }
  std::vector<float> data;
  std::vector<std::string> ids;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ','))
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": missing id column");
    ids.push_back(cell);
    size_t got = 0;
    while (std::getline(row, cell, ',')) {
      size_t pos = 0;
      double v;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(lineno) +
                              ": cannot parse value \"" + cell + "\"");
      }
      if (pos != cell.size())
        throw ValidationError(path + ":" + std::to_string(lineno) +
                              ": cannot parse value \"" + cell + "\"");
      data.push_back(static_cast<float>(v));
      ++got;
    }
    if (got != dims)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(dims) + " values, got " +
                            std::to_string(got));
  }
  return EmbeddingMatrix(ids.size(), dims, std::move(data), std::move(ids));
}

inline EmbeddingMatrix load_embeddings(const std::string& path,
                                       EmbeddingFormat format) {
  return format == EmbeddingFormat::Binary ? load_embeddings_binary(path)
                                           : load_embeddings_csv(path);
}

}  // namespace madpr
