#pragma once

#include <cstdint>
#include <random>

namespace crowdlf {

using Rng = std::mt19937_64;

// splitmix64 mixer. Sub-streams are derived from a master seed with a tag and
// an index so that per-entity draws do not depend on loop or thread order.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t tag, uint64_t index) {
  return splitmix64(splitmix64(master ^ (tag * 0x9e3779b97f4a7c15ULL)) + index);
}

}  // namespace crowdlf
