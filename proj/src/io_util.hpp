// SPDX-License-Identifier: Apache-2.0
//
// Little-endian primitives for the binary container formats.

#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mcavd/error.hpp"

namespace mcavd::ioutil {

inline void put_u16(std::ostream& out, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_i64(std::ostream& out, int64_t v) { put_u64(out, static_cast<uint64_t>(v)); }

inline void put_f32(std::ostream& out, const float* data, size_t count) {
  static_assert(sizeof(float) == 4);
  for (size_t i = 0; i < count; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    put_u32(out, bits);
  }
}

inline void put_f64(std::ostream& out, double v) {
  static_assert(sizeof(double) == 8);
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

inline uint16_t get_u16(std::istream& in, const std::string& what) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) throw FormatError("truncated file reading " + what);
  return static_cast<uint16_t>(b[0] | b[1] << 8);
}

inline uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated file reading " + what);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline uint64_t get_u64(std::istream& in, const std::string& what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("truncated file reading " + what);
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  return u;
}

inline int64_t get_i64(std::istream& in, const std::string& what) {
  return static_cast<int64_t>(get_u64(in, what));
}

inline void get_f32(std::istream& in, float* data, size_t count, const std::string& what) {
  for (size_t i = 0; i < count; ++i) {
    uint32_t bits = get_u32(in, what);
    std::memcpy(&data[i], &bits, 4);
  }
}

inline double get_f64(std::istream& in, const std::string& what) {
  uint64_t bits = get_u64(in, what);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

} // namespace mcavd::ioutil
