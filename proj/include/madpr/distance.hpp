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
#include <cstddef>
#include <span>

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif

#include "madpr/common.hpp"

namespace madpr {

// Distance kernels accumulate in double. Every SIMD variant below uses one
// accumulator per pair advancing in vector-width steps with a scalar tail,
// so for the same pair of values the f32 kernel (which widens exactly), the
// f64 kernel, and each slot of the blocked x4 kernel produce bit-identical
// sums. That keeps graph construction, persisted edge costs, and query-time
// recomputation consistent regardless of which path touched the data, and
// makes builds reproducible across thread counts.

namespace detail {

template <class T>
inline double squared_l2_impl(const T* __restrict a, const T* __restrict b,
                              size_t d) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    double d0 = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    double d1 = static_cast<double>(a[i + 1]) - static_cast<double>(b[i + 1]);
    double d2 = static_cast<double>(a[i + 2]) - static_cast<double>(b[i + 2]);
    double d3 = static_cast<double>(a[i + 3]) - static_cast<double>(b[i + 3]);
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  for (; i < d; ++i) {
    double dd = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s0 += dd * dd;
  }
  return (s0 + s1) + (s2 + s3);
}

template <class T>
inline double dot_impl(const T* __restrict a, const T* __restrict b, size_t d) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
    s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
    s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
  }
  for (; i < d; ++i) s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return (s0 + s1) + (s2 + s3);
}

#if defined(__AVX512F__)

inline __m512d load_wide(const float* p) {
  return _mm512_cvtps_pd(_mm256_loadu_ps(p));
}
inline __m512d load_wide(const double* p) { return _mm512_loadu_pd(p); }

template <class T>
inline double squared_l2_simd(const T* __restrict a, const T* __restrict b,
                              size_t d) {
  __m512d acc = _mm512_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= d; i += 8) {
    __m512d diff = _mm512_sub_pd(load_wide(a + i), load_wide(b + i));
    acc = _mm512_fmadd_pd(diff, diff, acc);
  }
  double s = _mm512_reduce_add_pd(acc);
  for (; i < d; ++i) {
    double dd = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += dd * dd;
  }
  return s;
}

template <class T>
inline double dot_simd(const T* __restrict a, const T* __restrict b, size_t d) {
  __m512d acc = _mm512_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= d; i += 8)
    acc = _mm512_fmadd_pd(load_wide(a + i), load_wide(b + i), acc);
  double s = _mm512_reduce_add_pd(acc);
  for (; i < d; ++i)
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

inline void squared_l2_f64_x4(const double* __restrict a,
                              const double* __restrict b0,
                              const double* __restrict b1,
                              const double* __restrict b2,
                              const double* __restrict b3, size_t d,
                              double out[4]) {
  __m512d acc0 = _mm512_setzero_pd(), acc1 = _mm512_setzero_pd();
  __m512d acc2 = _mm512_setzero_pd(), acc3 = _mm512_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= d; i += 8) {
    __m512d va = _mm512_loadu_pd(a + i);
    __m512d d0 = _mm512_sub_pd(va, _mm512_loadu_pd(b0 + i));
    __m512d d1 = _mm512_sub_pd(va, _mm512_loadu_pd(b1 + i));
    __m512d d2 = _mm512_sub_pd(va, _mm512_loadu_pd(b2 + i));
    __m512d d3 = _mm512_sub_pd(va, _mm512_loadu_pd(b3 + i));
    acc0 = _mm512_fmadd_pd(d0, d0, acc0);
    acc1 = _mm512_fmadd_pd(d1, d1, acc1);
    acc2 = _mm512_fmadd_pd(d2, d2, acc2);
    acc3 = _mm512_fmadd_pd(d3, d3, acc3);
  }
  out[0] = _mm512_reduce_add_pd(acc0);
  out[1] = _mm512_reduce_add_pd(acc1);
  out[2] = _mm512_reduce_add_pd(acc2);
  out[3] = _mm512_reduce_add_pd(acc3);
  for (; i < d; ++i) {
    double da = a[i] - b0[i];
    out[0] += da * da;
    da = a[i] - b1[i];
    out[1] += da * da;
    da = a[i] - b2[i];
    out[2] += da * da;
    da = a[i] - b3[i];
    out[3] += da * da;
  }
}

#elif defined(__AVX2__) && defined(__FMA__)

inline double hsum256(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

inline __m256d load_wide(const float* p) {
  return _mm256_cvtps_pd(_mm_loadu_ps(p));
}
inline __m256d load_wide(const double* p) { return _mm256_loadu_pd(p); }

template <class T>
inline double squared_l2_simd(const T* __restrict a, const T* __restrict b,
                              size_t d) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    __m256d diff = _mm256_sub_pd(load_wide(a + i), load_wide(b + i));
    acc = _mm256_fmadd_pd(diff, diff, acc);
  }
  double s = hsum256(acc);
  for (; i < d; ++i) {
    double dd = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += dd * dd;
  }
  return s;
}

template <class T>
inline double dot_simd(const T* __restrict a, const T* __restrict b, size_t d) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= d; i += 4)
    acc = _mm256_fmadd_pd(load_wide(a + i), load_wide(b + i), acc);
  double s = hsum256(acc);
  for (; i < d; ++i)
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

inline void squared_l2_f64_x4(const double* __restrict a,
                              const double* __restrict b0,
                              const double* __restrict b1,
                              const double* __restrict b2,
                              const double* __restrict b3, size_t d,
                              double out[4]) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd(), acc3 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d d0 = _mm256_sub_pd(va, _mm256_loadu_pd(b0 + i));
    __m256d d1 = _mm256_sub_pd(va, _mm256_loadu_pd(b1 + i));
    __m256d d2 = _mm256_sub_pd(va, _mm256_loadu_pd(b2 + i));
    __m256d d3 = _mm256_sub_pd(va, _mm256_loadu_pd(b3 + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    acc2 = _mm256_fmadd_pd(d2, d2, acc2);
    acc3 = _mm256_fmadd_pd(d3, d3, acc3);
  }
  out[0] = hsum256(acc0);
  out[1] = hsum256(acc1);
  out[2] = hsum256(acc2);
  out[3] = hsum256(acc3);
  for (; i < d; ++i) {
    double da = a[i] - b0[i];
    out[0] += da * da;
    da = a[i] - b1[i];
    out[1] += da * da;
    da = a[i] - b2[i];
    out[2] += da * da;
    da = a[i] - b3[i];
    out[3] += da * da;
  }
}

#endif

}  // namespace detail

#if defined(__AVX512F__) || (defined(__AVX2__) && defined(__FMA__))
#define MADPR_SIMD_KERNELS 1
#endif

inline double squared_l2(const float* a, const float* b, size_t d) {
#ifdef MADPR_SIMD_KERNELS
  return detail::squared_l2_simd(a, b, d);
#else
  return detail::squared_l2_impl(a, b, d);
#endif
}
inline double squared_l2(const double* a, const double* b, size_t d) {
#ifdef MADPR_SIMD_KERNELS
  return detail::squared_l2_simd(a, b, d);
#else
  return detail::squared_l2_impl(a, b, d);
#endif
}
inline double dot(const float* a, const float* b, size_t d) {
#ifdef MADPR_SIMD_KERNELS
  return detail::dot_simd(a, b, d);
#else
  return detail::dot_impl(a, b, d);
#endif
}
inline double dot(const double* a, const double* b, size_t d) {
#ifdef MADPR_SIMD_KERNELS
  return detail::dot_simd(a, b, d);
#else
  return detail::dot_impl(a, b, d);
#endif
}

/// Squared distances of one f64 row against four others; the blocked form
/// of the pairwise kernel used by graph construction.
inline void squared_l2_x4(const double* a, const double* b0, const double* b1,
                          const double* b2, const double* b3, size_t d,
                          double out[4]) {
#ifdef MADPR_SIMD_KERNELS
  detail::squared_l2_f64_x4(a, b0, b1, b2, b3, d, out);
#else
  out[0] = detail::squared_l2_impl(a, b0, d);
  out[1] = detail::squared_l2_impl(a, b1, d);
  out[2] = detail::squared_l2_impl(a, b2, d);
  out[3] = detail::squared_l2_impl(a, b3, d);
#endif
}

template <class T>
inline double l2_norm(const T* a, size_t d) {
  return std::sqrt(dot(a, a, d));
}

inline void check_same_dims(size_t da, size_t db) {
  if (da != db)
    throw ValidationError("dimension mismatch: " + std::to_string(da) +
                          " vs " + std::to_string(db));
}

/// ||a - b||_2
inline double euclidean_distance(std::span<const float> a,
                                 std::span<const float> b) {
  check_same_dims(a.size(), b.size());
  return std::sqrt(squared_l2(a.data(), b.data(), a.size()));
}

/// 1 - a.b / (||a|| ||b||); throws on a zero-norm operand.
inline double cosine_distance(std::span<const float> a,
                              std::span<const float> b) {
  check_same_dims(a.size(), b.size());
  double na = l2_norm(a.data(), a.size());
  double nb = l2_norm(b.data(), b.size());
  if (na == 0.0 || nb == 0.0)
    throw ValidationError("cosine distance undefined for zero-norm vector");
  return 1.0 - dot(a.data(), b.data(), a.size()) / (na * nb);
}

}  // namespace madpr
