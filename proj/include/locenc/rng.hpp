#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace locenc {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named stream ("init", "shuffle", ...)
/// from a run's root seed, so stages draw from separate generators.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

inline Rng make_rng(std::uint64_t root, std::string_view stream) {
  return Rng(derive_seed(root, stream));
}

/// Uniform double in [lo, hi) from the raw 64-bit engine output.
/// Independent of the standard library's distribution implementation.
inline double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

/// Standard normal via Box-Muller (one draw per call).
double standard_normal(Rng& rng);

/// Uniform integer in [0, n).
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

}  // namespace locenc
