#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gravalloc {

/// Seedable generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the standard.
/// The standard library's distributions are implementation-defined, so every
/// variate is derived here from raw 64-bit words: uniforms use the top 53 bits,
/// Poisson counts use multiplication (small means) or PTRS transformed rejection.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for `(seed, stream)`; streams with distinct ids do not overlap in practice.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);
  /// Stream keyed by a name (e.g. a test name) via FNV-1a.
  static Rng stream(std::uint64_t seed, std::string_view name);

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  std::uint64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive well-mixed child seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t hash_name(std::string_view name) noexcept;

}  // namespace gravalloc
