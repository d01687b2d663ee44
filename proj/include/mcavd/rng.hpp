// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace mcavd {

/// Seeded pseudo-random stream with deterministic, platform-independent
/// sampling. One root generator is created per run and split per consumer
/// (init, dropout, data shuffling) so that adding a consumer does not
/// perturb the draws of the others.
///
/// std::mt19937_64 output is fully specified by the standard; the
/// distributions here are hand-rolled on top of it because the standard
/// library distributions are implementation-defined.
class SplitRng {
public:
  explicit SplitRng(uint64_t seed) : engine_(seed), seed_(seed) {}

  /// Child generator whose stream depends only on (seed, tag).
  SplitRng split(std::string_view tag) const {
    uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
    auto mix = [&h](unsigned char byte) {
      h ^= byte;
      h *= 0x100000001b3ull;
    };
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed_ >> (8 * i)));
    for (char c : tag) mix(static_cast<unsigned char>(c));
    return SplitRng(h);
  }

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  /// Standard normal via Box-Muller (no cached spare, keeps the draw
  /// count predictable).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename It>
  void shuffle(It first, It last) {
    auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      auto j = static_cast<decltype(i)>(next_u64() % static_cast<uint64_t>(i + 1));
      std::swap(first[i], first[j]);
    }
  }

  uint64_t seed() const { return seed_; }

private:
  std::mt19937_64 engine_;
  uint64_t seed_;
};

} // namespace mcavd
