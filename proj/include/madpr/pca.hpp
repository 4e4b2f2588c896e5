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

#include <vector>

#include "madpr/embedding.hpp"
#include "madpr/lanczos.hpp"

namespace madpr {

/// Variance-maximizing linear projection: components are the top
/// eigenvectors of the empirical covariance of the mean-centered rows.
struct PcaModel {
  size_t dims_in = 0;   // D
  size_t dims_out = 0;  // M
  std::vector<double> mean;            // length D
  DenseMatrix components;              // D x M, orthonormal columns
  std::vector<double> explained_variance;  // length M, descending

  uint64_t fingerprint() const {
    Fnv1a64 h;
    h.update_string("pca");
    h.update_u64(dims_in);
    h.update_u64(dims_out);
    h.update_span(mean);
    h.update_span(components.storage());
    h.update_span(explained_variance);
    return h.digest();
  }
};

namespace detail {

// Covariance matvec without materializing the D x D matrix:
// C x = (1/(N-1)) Xc^T (Xc x), two streaming passes over the f32 rows.
struct CovarianceOperator {
  const EmbeddingMatrix* m;
  const std::vector<double>* mean;

  size_t dim() const { return m->n_dims(); }

  void apply(const double* x, double* y) const {
    size_t n = m->n_rows(), d = m->n_dims();
    double mean_dot_x = 0.0;
    for (size_t c = 0; c < d; ++c) mean_dot_x += (*mean)[c] * x[c];
    for (size_t c = 0; c < d; ++c) y[c] = 0.0;
    double t_total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const float* row = m->row(i);
      double t = -mean_dot_x;
      for (size_t c = 0; c < d; ++c) t += static_cast<double>(row[c]) * x[c];
      t_total += t;
      for (size_t c = 0; c < d; ++c) y[c] += t * static_cast<double>(row[c]);
    }
    double scale = 1.0 / static_cast<double>(n - 1);
    for (size_t c = 0; c < d; ++c)
      y[c] = (y[c] - t_total * (*mean)[c]) * scale;
  }
};

}  // namespace detail

inline PcaModel fit_pca(const EmbeddingMatrix& m, size_t dims,
                        uint64_t seed = 0x6d61647072ULL, double tol = 1e-9,
                        size_t max_iter = 0) {
  size_t n = m.n_rows(), d = m.n_dims();
  if (n < 2) throw ValidationError("fit_pca requires at least 2 rows");
  if (dims < 1 || dims > std::min(n, d))
    throw ValidationError("pca dims must lie in [1, min(N, D)]");
  PcaModel model;
  model.dims_in = d;
  model.dims_out = dims;
  model.mean.assign(d, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const float* row = m.row(i);
    for (size_t c = 0; c < d; ++c) model.mean[c] += static_cast<double>(row[c]);
  }
  for (auto& v : model.mean) v /= static_cast<double>(n);

  detail::CovarianceOperator op{&m, &model.mean};
  LanczosOptions opt;
  opt.seed = seed;
  opt.tol = tol;
  opt.max_iter = max_iter;
  LanczosResult eig = lanczos_largest(op, dims, opt);

  model.components = DenseMatrix(d, dims);
  model.explained_variance.resize(dims);
  for (size_t c = 0; c < dims; ++c) {
    // covariance is PSD; clip the tiny negative rounding leakage
    model.explained_variance[c] = std::max(0.0, eig.eigenvalues[c]);
    for (size_t r = 0; r < d; ++r)
      model.components(r, c) = eig.vectors(r, c);
  }
  return model;
}

/// z = W^T (e - mean) for every row; output dims named "pc0..pc{M-1}" keep
/// the input ids.
inline EmbeddingMatrix pca_project(const PcaModel& model,
                                   const EmbeddingMatrix& m) {
  if (m.n_dims() != model.dims_in)
    throw ValidationError("pca_project: matrix dims do not match the model");
  size_t n = m.n_rows(), d = model.dims_in, out_d = model.dims_out;
  std::vector<float> data(n * out_d);
  std::vector<double> centered(d);
  for (size_t i = 0; i < n; ++i) {
    const float* row = m.row(i);
    for (size_t c = 0; c < d; ++c)
      centered[c] = static_cast<double>(row[c]) - model.mean[c];
    for (size_t c = 0; c < out_d; ++c) {
      double acc = 0.0;
      for (size_t r = 0; r < d; ++r)
        acc += centered[r] * model.components(r, c);
      data[i * out_d + c] = static_cast<float>(acc);
    }
  }
  return EmbeddingMatrix(n, out_d, std::move(data),
                         std::vector<std::string>(m.ids()));
}

// Container: magic "MADPRPCA", u32 version=1, u32 D, u32 M, D f64 mean,
// D*M f64 components (row-major), M f64 explained variances.

inline void save_pca(const PcaModel& model, const std::string& path) {
  BinaryWriter w(path);
  w.magic("MADPRPCA");
  w.u32(1);
  w.u32(static_cast<uint32_t>(model.dims_in));
  w.u32(static_cast<uint32_t>(model.dims_out));
  w.array(model.mean);
  w.array(model.components.storage());
  w.array(model.explained_variance);
  w.close();
}

inline PcaModel load_pca(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("MADPRPCA");
  uint32_t version = r.u32();
  if (version != 1)
    throw ValidationError("unsupported pca container version in " + path);
  PcaModel model;
  model.dims_in = r.u32();
  model.dims_out = r.u32();
  r.array(model.mean, model.dims_in);
  model.components = DenseMatrix(model.dims_in, model.dims_out);
  r.array(model.components.storage(), model.dims_in * model.dims_out);
  r.array(model.explained_variance, model.dims_out);
  return model;
}

}  // namespace madpr
