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

namespace madpr {

// Portable counter-based generator. Every synthetic corpus in this project is
// a pure function of (seed, stream, counter), so any language that implements
// the three formulas below reproduces it bit-for-bit:
//
//   mix(x)                = SplitMix64 finalizer of (x + 0x9E3779B97F4A7C15)
//   word(seed, stream, i) = mix(mix(seed + 0xC2B2AE3D27D4EB4F * stream)
//                               + 0x9E3779B97F4A7C15 * i)
//   uniform(...)          = (word >> 11) * 2^-53            in [0, 1)
//   normal(seed, s, i)    = sqrt(-2 ln u(2i)) * cos(2 pi u(2i+1)),
//                           with u = 2^-53 substituted when u(2i) == 0
//
// All integer arithmetic is modulo 2^64.

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream)
      : key_(splitmix64(seed + 0xC2B2AE3D27D4EB4FULL * stream)) {}

  uint64_t word(uint64_t i) const {
    return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * i);
  }

  /// Uniform in [0, 1) from counter i.
  double uniform(uint64_t i) const {
    return static_cast<double>(word(i) >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi) from counter i.
  double uniform(uint64_t i, double lo, double hi) const {
    return lo + (hi - lo) * uniform(i);
  }

  /// Standard normal via Box-Muller; sample i consumes counters 2i and 2i+1.
  double normal(uint64_t i) const {
    double u1 = uniform(2 * i);
    double u2 = uniform(2 * i + 1);
    if (u1 == 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t key_;
};

// Stream ids used by the synthetic generators; documented so external
// reimplementations can address the same sub-sequences.
enum RngStream : uint64_t {
  kStreamCorpus = 0,
  kStreamQueries = 1,
  kStreamBasis = 2,
  kStreamNoise = 3,
  kStreamNoiseQueries = 4,
  kStreamParam = 5,
  kStreamParamQueries = 6,
};

}  // namespace madpr
