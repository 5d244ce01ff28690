#pragma once

// Counter-based Gaussian noise generation.
//
// Streams are a pure function of (seed, index): sample j of a stream never
// depends on how many samples were drawn before it, so Monte-Carlo
// realizations can be seeded independently and reproduced exactly.
// Uniform bits come from splitmix64 applied to seed + j*golden; normal
// deviates from the Box-Muller transform (cosine branch).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace ivdeepc::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// One round of the splitmix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Mix a stream tag into a seed, for deriving independent sub-streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag));
}

/// Uniform double in (0, 1): top 53 bits of the mixed counter, offset by
/// half an ulp so 0 and 1 are never returned.
inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t v = splitmix64(seed + counter * kGolden);
  return (static_cast<double>(v >> 11) + 0.5) / 9007199254740992.0;  // 2^53
}

/// Standard normal deviate, sample `index` of stream `seed`.
inline double standard_normal(std::uint64_t seed, std::uint64_t index) {
  const double u1 = uniform01(seed, 2 * index);
  const double u2 = uniform01(seed, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

/// Length-T i.i.d. N(0, variance) sequence.
inline std::vector<double> gaussian_stream(std::uint64_t seed, std::size_t T,
                                           double variance) {
  std::vector<double> out(T);
  const double scale = std::sqrt(variance);
  for (std::size_t j = 0; j < T; ++j)
    out[j] = scale * standard_normal(seed, j);
  return out;
}

}  // namespace ivdeepc::rng
