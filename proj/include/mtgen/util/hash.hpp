// 64-bit mixing and incremental hashing used for fingerprints, mock scores
// and ledger checksums. All hashes here are stable across platforms and runs;
// they are part of the on-disk formats, so do not change the constants.
#pragma once

#include <cstdint>
#include <string_view>

namespace mtgen::util {

// splitmix64 finalizer (Steele et al.); full-avalanche 64-bit mix.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t hash_combine(uint64_t seed, uint64_t v) {
  return mix64(seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

// FNV-1a over bytes; used for string keys and ledger line chaining.
constexpr uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t hash_str(std::string_view s, uint64_t seed = 0) {
  return mix64(fnv1a64(s) ^ mix64(seed));
}

}  // namespace mtgen::util
