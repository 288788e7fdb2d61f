#pragma once

// Seed plumbing. Per-sample and per-trial generators are seeded by mixing a
// root seed with structural indices, so any single draw can be reproduced
// without replaying the stream that preceded it.

#include <cstdint>

namespace surreal {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(root ^ 0x6a09e667f3bcc909ULL) ^ splitmix64(a) ^
                    splitmix64(b ^ 0xbb67ae8584caa73bULL));
}

}  // namespace surreal
