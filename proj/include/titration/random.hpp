#pragma once

// Deterministic seed derivation. Every random draw in the simulator comes from
// a std::mt19937_64 seeded by mixing an avatar seed with a purpose tag and an
// index, so results never depend on call order or thread scheduling.

#include <cstdint>
#include <random>

namespace titration {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  Avatar = 1,
  Fasting = 2,
  Smbg = 3,
  Cgm = 4,
  Adherence = 5,
};

constexpr std::uint64_t derive_seed(std::uint64_t base, Stream stream, std::uint64_t index) {
  return splitmix64(splitmix64(base ^ (static_cast<std::uint64_t>(stream) << 56)) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t base, Stream stream, std::uint64_t index) {
  return std::mt19937_64(derive_seed(base, stream, index));
}

}  // namespace titration
