#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace maxmix {

// https://prng.di.unimi.it/splitmix64.c
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_label(std::string_view label) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic substream: the same (seed, label, index) always yields the
// same engine; distinct labels or indices yield decorrelated streams.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view label,
                                 std::uint64_t index = 0) {
  std::uint64_t state = seed ^ (0x9e3779b97f4a7c15ULL + hash_label(label));
  std::uint64_t a = splitmix64(state);
  state ^= index * 0xda942042e4dd58b5ULL + 0x2545f4914f6cdd1dULL;
  std::uint64_t b = splitmix64(state);
  std::uint64_t c = splitmix64(state);
  std::uint64_t d = splitmix64(state);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                    static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace maxmix
