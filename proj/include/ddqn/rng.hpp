#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ddqn {

using Rng = std::mt19937_64;

// Derives an independent seed for a named component from one master seed,
// so env, agent, buffer and baseline streams can be reseeded separately.
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = master ^ h;
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_stream(std::uint64_t master, std::string_view name) {
  return Rng(stream_seed(master, name));
}

// Portable uniform draws: std::uniform_*_distribution is implementation
// defined, which would make metrics differ between standard libraries.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = Rng::max() - Rng::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace ddqn
