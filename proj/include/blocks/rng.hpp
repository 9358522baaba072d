#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace blocks {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent stream seed for (seed, tag, indices...), so per-episode
// randomness does not depend on visiting order or thread assignment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(seed);
  for (char c : tag) h = mix64(h ^ static_cast<unsigned char>(c));
  for (auto p : parts) h = mix64(h ^ p);
  return h;
}

inline std::mt19937_64 derive_rng(std::uint64_t seed, std::string_view tag,
                                  std::initializer_list<std::uint64_t> parts) {
  return std::mt19937_64(derive_seed(seed, tag, parts));
}

}  // namespace blocks
