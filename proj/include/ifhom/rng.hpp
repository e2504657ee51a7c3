#pragma once

/// @file rng.hpp
/// @brief Counter-based random streams (Philox4x32-10) with one independent
///        stream per simulated path.  Streams depend only on (seed, path index),
///        so ensembles are reproducible for any thread count.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ifhom {

/// One keyed block of Philox4x32-10.
struct PhiloxBlock {
  std::uint32_t w[4];
};

inline PhiloxBlock philox4x32(std::uint64_t key, std::uint64_t counter_hi,
                              std::uint64_t counter_lo) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  std::uint32_t x0 = static_cast<std::uint32_t>(counter_lo);
  std::uint32_t x1 = static_cast<std::uint32_t>(counter_lo >> 32);
  std::uint32_t x2 = static_cast<std::uint32_t>(counter_hi);
  std::uint32_t x3 = static_cast<std::uint32_t>(counter_hi >> 32);
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);

  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * x0;
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * x2;
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t y0 = hi1 ^ x1 ^ k0;
    const std::uint32_t y1 = lo1;
    const std::uint32_t y2 = hi0 ^ x3 ^ k1;
    const std::uint32_t y3 = lo0;
    x0 = y0;
    x1 = y1;
    x2 = y2;
    x3 = y3;
  }
  return {{x0, x1, x2, x3}};
}

/// Deterministic per-path stream: the block counter advances as values are
/// consumed; (seed, path) selects the stream.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path) : key_(seed), hi_(path) {}

  std::uint32_t next_u32() {
    if (avail_ == 0) refill();
    return block_.w[4 - avail_--];
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_u01() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    const std::uint64_t bits = (hi << 32) | lo;
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes uniforms in pairs.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_u01();
    const double u2 = next_u01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Bernoulli(p) from one uniform.
  bool next_bernoulli(double p) { return next_u01() < p; }

  /// Fair coin from a single 32-bit draw (cheap path for lattice walks).
  bool next_bit() { return (next_u32() & 0x80000000u) != 0; }

 private:
  void refill() {
    block_ = philox4x32(key_, hi_, lo_counter_++);
    avail_ = 4;
  }

  std::uint64_t key_;
  std::uint64_t hi_;
  std::uint64_t lo_counter_ = 0;
  PhiloxBlock block_{};
  int avail_ = 0;
  double spare_ = 0;
  bool have_spare_ = false;
};

/// Stable derivation of sub-seeds so different estimators use disjoint streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer on seed ^ rotated salt
  std::uint64_t z = seed ^ (salt * 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace ifhom
