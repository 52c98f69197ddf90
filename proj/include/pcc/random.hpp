#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pcc {

/// One SplitMix64 step. Only used to derive decorrelated substream seeds.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed for substream `tag` of the stream family identified by `seed`.
/// Nearby seeds and tags map to statistically unrelated streams.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t state = seed ^ (0x9E3779B97F4A7C15ull * (tag + 0x632BE59BD9B4E019ull));
  splitmix64_next(state);
  return splitmix64_next(state);
}

/// Deterministic random stream with platform-independent samplers.
///
/// mt19937_64 output and every mapping below are fully specified, so a fixed
/// seed reproduces bit-identical sequences on any conforming implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Waiting time of a Poisson process with the given rate. Consumes one
  /// uniform; never returns infinity for rate > 0.
  double exponential(double rate_hz) { return -std::log1p(-uniform01()) / rate_hz; }

  /// Poisson sample by bottom-up CDF inversion. Consumes exactly one uniform
  /// per draw. Valid for mean <= 700 (exp(-mean) stays normal).
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double u = uniform01();
    double pmf = std::exp(-mean);
    double cdf = pmf;
    int k = 0;
    const int cap = static_cast<int>(mean + 60.0 * std::sqrt(mean + 1.0) + 100.0);
    while (u >= cdf && k < cap) {
      ++k;
      pmf *= mean / k;
      cdf += pmf;
    }
    return k;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pcc
