#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace etchvm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic substream derivation: one master seed expands into
// independent named streams (and indexed per-item streams) so that
// parallel evaluation can reproduce the sequential results exactly.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view role) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : role) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return splitmix64(master ^ h);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master + 0x632be59bd9b4e019ull * (index + 1));
}

// The std:: distributions are implementation-defined, so the draws below are
// hand-rolled on top of mt19937_64's pinned output sequence: identical seeds
// give identical values on every platform.

inline double uniform01(Rng& rng) {  // [0, 1), 53-bit resolution
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t bounded_uint(Rng& rng, std::uint64_t range) {  // [0, range)
  const std::uint64_t threshold = (0 - range) % range;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % range;
  }
}

inline double normal01(Rng& rng) {  // Box-Muller, cosine branch only
  const double u1 = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double u2 = uniform01(rng);
  const double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace etchvm
