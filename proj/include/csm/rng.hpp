#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

namespace csm {

/// Counter-based 64-bit generator.
///
/// Output i of stream (seed, stream) is the SplitMix64 finalizer applied to
/// key + i * 0x9E3779B97F4A7C15, where key mixes seed and stream. Every
/// variate below is derived from these words with fixed arithmetic, so a
/// given (seed, stream) produces identical sequences on every platform.
/// Distinct streams are used for independent chains and workers.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Uniform integer on [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace csm
