#pragma once

// Reproducible random streams. All draws are built from raw 64-bit engine
// output with our own transforms so results do not depend on the standard
// library's distribution implementations.

#include <cstdint>
#include <random>

namespace dosefind {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for stream `index` under `base`. Counter based, so the seed of any
/// stream is independent of how many other streams were derived before it.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return mix64(mix64(base) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Uniform on (0, 1) from the top 53 bits of a 64-bit word.
constexpr double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal variate determined entirely by (key1, key2, salt).
double keyed_normal(std::uint64_t key1, std::uint64_t key2, std::uint64_t salt) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return to_unit_open(engine_()); }
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// N(mean, sd^2) restricted to (lo, hi); bounds may be infinite.
  double truncated_normal(double mean, double sd, double lo, double hi);

  /// Standard normal restricted to (a, b).
  double truncated_std_normal(double a, double b);

 private:
  std::mt19937_64 engine_;
};

}  // namespace dosefind
