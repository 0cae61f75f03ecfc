#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace adeye {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Bijective on 64 bits.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// FNV-1a, 64-bit. Used for sensor-id stream keys and trace digests.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// seed_run = mix(seed + (run_id + 1) * gamma).
constexpr std::uint64_t derive_run_seed(std::uint64_t scenario_seed, std::uint64_t run_id) {
  return splitmix64_mix(scenario_seed + (run_id + 1) * kGoldenGamma);
}

// Stream key for one named consumer (a sensor) of a run seed.
constexpr std::uint64_t derive_stream_seed(std::uint64_t run_seed, std::string_view name) {
  return splitmix64_mix(run_seed ^ splitmix64_mix(fnv1a64(name)));
}

// xoshiro256** (Blackman, Vigna), state seeded from four SplitMix64 outputs.
// Floating-point draws are built only from integer ops plus log/sqrt/cos,
// so streams agree across platforms with an IEEE-754 libm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller, cosine branch only (two uniforms per draw).
  double gaussian();
  double gaussian(double sigma) { return sigma * gaussian(); }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace adeye
