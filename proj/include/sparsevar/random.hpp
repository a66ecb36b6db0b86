#pragma once

#include <cstdint>
#include <random>

namespace sparsevar {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` of `master`: mix64(master XOR mix64(index)).
/// Every seed used by the benchmark and experiment runner is derived this way,
/// so a run is fully determined by its master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master ^ mix64(index));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace sparsevar
