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

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "madpr binary containers are little-endian; add byte swapping "
              "before building on a big-endian target");

namespace madpr {

/// Bad user input: malformed files, invalid configs, contract violations.
/// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Failures during execution (I/O, numerical non-convergence, allocation).
/// The CLI maps this to exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void log_warn(const std::string& msg) {
  std::fprintf(stderr, "[madpr] warning: %s\n", msg.c_str());
}

inline void log_info(const std::string& msg) {
  std::fprintf(stderr, "[madpr] %s\n", msg.c_str());
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit hashing, used for artifact fingerprints and manifests.
// ---------------------------------------------------------------------------

class Fnv1a64 {
 public:
  void update(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update_u64(uint64_t v) { update(&v, sizeof(v)); }
  void update_u32(uint32_t v) { update(&v, sizeof(v)); }
  void update_string(std::string_view s) { update(s.data(), s.size()); }
  template <class T>
  void update_span(const std::vector<T>& v) {
    update(v.data(), v.size() * sizeof(T));
  }
  uint64_t digest() const { return state_; }

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline uint64_t fingerprint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open file for fingerprinting: " + path);
  Fnv1a64 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update(buf, static_cast<size_t>(in.gcount()));
  }
  return h.digest();
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Little-endian binary stream helpers shared by all container formats.
// ---------------------------------------------------------------------------

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw RuntimeError("cannot open for writing: " + path);
  }
  void bytes(const void* data, size_t len) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
  }
  void u8(uint8_t v) { bytes(&v, 1); }
  void u32(uint32_t v) { bytes(&v, 4); }
  void u64(uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void magic(const char (&m)[9]) { bytes(m, 8); }
  template <class T>
  void array(const std::vector<T>& v) {
    bytes(v.data(), v.size() * sizeof(T));
  }
  void close() {
    out_.close();
    if (!out_) throw RuntimeError("write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw ValidationError("cannot open: " + path);
  }
  void bytes(void* data, size_t len) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    if (static_cast<size_t>(in_.gcount()) != len)
      throw ValidationError("truncated data in " + path_);
  }
  uint8_t u8() { uint8_t v; bytes(&v, 1); return v; }
  uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
  uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
  float f32() { float v; bytes(&v, 4); return v; }
  double f64() { double v; bytes(&v, 8); return v; }
  void expect_magic(const char (&m)[9]) {
    char got[8];
    in_.read(got, 8);
    if (in_.gcount() != 8 || std::memcmp(got, m, 8) != 0)
      throw ValidationError("bad magic in " + path_ + " (expected " +
                            std::string(m, 8) + ")");
  }
  template <class T>
  void array(std::vector<T>& v, size_t count) {
    v.resize(count);
    bytes(v.data(), count * sizeof(T));
  }
  bool at_eof() {
    in_.peek();
    return in_.eof();
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace madpr
