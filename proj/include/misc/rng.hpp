#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace misc {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent stream for one purpose ("init", "data", "noise:17", ...) derived
// from the single user-facing seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  return splitmix64(seed ^ splitmix64(fnv1a64(purpose)));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::string_view purpose) { return Rng(derive_seed(seed, purpose)); }

// std::uniform_real_distribution is implementation-defined; these are not,
// which keeps datasets and initializations identical across toolchains.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }
inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi_inclusive - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}
// Box-Muller; consumes two uniforms per call.
double normal(Rng& rng);

}  // namespace misc
