#pragma once

// Seeded randomness for simulations. The engine is std::mt19937_64, whose
// output sequence is fixed by the standard; the distributions are written out
// here because the standard library's are implementation-defined, and traces
// must be identical across toolchains.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace pob {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent seed for a named sub-stream of one run.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x5851f42d4c957f2dULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do x = next();
    while (x >= limit);
    return x % bound;
  }

  bool bernoulli(double p) { return p > 0 && uniform01() < p; }

  /// Box-Muller; one draw per call so the stream position stays predictable.
  double normal(double mean, double stddev) {
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::array<std::uint8_t, 32> bytes32() {
    std::array<std::uint8_t, 32> out{};
    for (std::size_t i = 0; i < out.size(); i += 8) {
      const auto v = next();
      for (std::size_t j = 0; j < 8; ++j) out[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pob
