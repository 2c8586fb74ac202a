#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace evrptw {

/// SplitMix64 finalizer. Used to derive independent substream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Derives a child seed from a parent seed and a path of integer keys, e.g.
/// derive_seed(seed, {kCustomerStream, i, retry}).
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> keys);

/// Seedable generator with platform-independent draws. The engine is
/// std::mt19937_64 (bit-exact by the standard); the distributions below are
/// implemented here because the std:: ones are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] (inclusive), unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller (no cached second value, so the stream
  /// position depends only on the call count).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Index drawn with probability proportional to weights[i] (non-negative,
  /// positive sum).
  template <typename Range>
  std::size_t categorical(const Range& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    std::size_t last_positive = 0;
    std::size_t i = 0;
    for (double w : weights) {
      if (w > 0.0) {
        last_positive = i;
        if (u < w) return i;
        u -= w;
      }
      ++i;
    }
    return last_positive;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace evrptw
