#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace acr {

// Counter-based generator: draw k of stream s under seed v is
//   mix(mix(v ^ (s * GAMMA)) + (k + 1) * GAMMA)
// where mix is the SplitMix64 finalizer and GAMMA = 0x9E3779B97F4A7C15.
// Pure 64-bit integer arithmetic, so masks and initializations are
// bit-reproducible across platforms. uniform() maps the top 53 bits
// to [0, 1); normal() is Box-Muller over two uniform draws.
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : base_(mix(seed ^ (stream * kGamma))), counter_(0) {}

  std::uint64_t next_u64() { return mix(base_ + (++counter_) * kGamma); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t base_;
  std::uint64_t counter_;
};

// FNV-1a, used for id hashing and config fingerprints.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace acr
