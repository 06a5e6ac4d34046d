#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aggnet {

using NodeId = int32_t; // data-graph node, dense, assigned at load
using OvlId = int32_t;  // overlay node

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; all seeded hashing in the project goes through this
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) { return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL)); }

} // namespace aggnet
