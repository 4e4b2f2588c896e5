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

#include <string>
#include <vector>

#include "madpr/embedding.hpp"
#include "madpr/rng.hpp"

namespace madpr {

/// i.i.d. standard-normal rows, l2-normalized, ids "<prefix>0..". A pure
/// function of (n, d, seed, stream), bit-reproducible across platforms.
inline EmbeddingMatrix synth_gaussian(size_t n, size_t d, uint64_t seed,
                                      uint64_t stream = kStreamCorpus,
                                      const std::string& id_prefix = "p") {
  if (n < 1 || d < 1)
    throw ValidationError("synth_gaussian requires n, d >= 1");
  CounterRng rng(seed, stream);
  std::vector<float> data(n * d);
  std::vector<std::string> ids(n);
  for (size_t i = 0; i < n; ++i) {
    double norm_sq = 0.0;
    for (size_t c = 0; c < d; ++c) {
      double z = rng.normal(i * d + c);
      data[i * d + c] = static_cast<float>(z);
      norm_sq += z * z;
    }
    double norm = std::sqrt(norm_sq);
    if (norm > 0.0)
      for (size_t c = 0; c < d; ++c)
        data[i * d + c] = static_cast<float>(
            static_cast<double>(data[i * d + c]) / norm);
    ids[i] = id_prefix + std::to_string(i);
  }
  return EmbeddingMatrix(n, d, std::move(data), std::move(ids));
}

/// One-dimensional S-shaped curve in 3-D, embedded into ambient_d by a
/// seeded random orthonormal map, with isotropic ambient gaussian noise:
///
///   c(t) = (sin t,  0.1 t,  sign(t) (cos t - 1)),   t in [-3pi/2, 3pi/2]
///
/// The two unit-radius loops fold back on themselves, so ambient distance
/// misorders the arc-length ordering across folds while the transverse
/// 0.1 t component keeps the curve genuinely three-dimensional. Curve speed
/// is bounded by sqrt(2), so |c(t1) - c(t2)| <= sqrt(2) |t1 - t2|.
class SCurveSampler {
 public:
  SCurveSampler(size_t ambient_d, double noise_sigma, uint64_t seed)
      : ambient_(ambient_d), sigma_(noise_sigma), seed_(seed) {
    if (ambient_d < 3)
      throw ValidationError("s-curve sampler requires ambient_d >= 3");
    // random 3-frame in R^ambient via Gram-Schmidt on gaussian columns
    CounterRng rng(seed, kStreamBasis);
    basis_.assign(3 * ambient_, 0.0);
    for (size_t col = 0; col < 3; ++col) {
      double* b = basis_.data() + col * ambient_;
      for (size_t r = 0; r < ambient_; ++r)
        b[r] = rng.normal(col * ambient_ + r);
      for (size_t prev = 0; prev < col; ++prev) {
        const double* p = basis_.data() + prev * ambient_;
        double proj = 0.0;
        for (size_t r = 0; r < ambient_; ++r) proj += p[r] * b[r];
        for (size_t r = 0; r < ambient_; ++r) b[r] -= proj * p[r];
      }
      double norm = l2_norm(b, ambient_);
      for (size_t r = 0; r < ambient_; ++r) b[r] /= norm;
    }
  }

  static void curve_point(double t, double out[3]) {
    out[0] = std::sin(t);
    out[1] = 0.1 * t;
    out[2] = (t >= 0.0 ? 1.0 : -1.0) * (std::cos(t) - 1.0);
  }

  /// Samples n points with uniform t; param_stream/noise_stream address the
  /// counter-rng sub-sequences so corpus and held-out queries never overlap.
  std::pair<EmbeddingMatrix, std::vector<double>> sample(
      size_t n, uint64_t param_stream, uint64_t noise_stream,
      const std::string& id_prefix) const {
    constexpr double kHalfPi3 = 3.0 * 1.5707963267948966;
    CounterRng param_rng(seed_, param_stream);
    CounterRng noise_rng(seed_, noise_stream);
    std::vector<double> t(n);
    std::vector<float> data(n * ambient_);
    std::vector<std::string> ids(n);
    for (size_t i = 0; i < n; ++i) {
      t[i] = param_rng.uniform(i, -kHalfPi3, kHalfPi3);
      double p3[3];
      curve_point(t[i], p3);
      for (size_t r = 0; r < ambient_; ++r) {
        double v = p3[0] * basis_[r] + p3[1] * basis_[ambient_ + r] +
                   p3[2] * basis_[2 * ambient_ + r];
        if (sigma_ > 0.0)
          v += sigma_ * noise_rng.normal(i * ambient_ + r);
        data[i * ambient_ + r] = static_cast<float>(v);
      }
      ids[i] = id_prefix + std::to_string(i);
    }
    return {EmbeddingMatrix(n, ambient_, std::move(data), std::move(ids)),
            std::move(t)};
  }

 private:
  size_t ambient_;
  double sigma_;
  uint64_t seed_;
  std::vector<double> basis_;  // 3 orthonormal rows of length ambient_
};

/// Corpus-side convenience wrapper; returns the embedded points and their
/// generative curve parameters.
inline std::pair<EmbeddingMatrix, std::vector<double>> synth_s_curve(
    size_t n, size_t ambient_d, double noise_sigma, uint64_t seed) {
  SCurveSampler sampler(ambient_d, noise_sigma, seed);
  return sampler.sample(n, kStreamParam, kStreamNoise, "p");
}

}  // namespace madpr
