#pragma once

#include <cstdint>
#include <initializer_list>

namespace rigrecon {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives a stream seed from a run seed and identifying integers.
inline std::uint64_t derive_seed(std::uint64_t run_seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = splitmix64(run_seed);
  for (std::uint64_t id : ids) h = splitmix64(h ^ id);
  return h;
}

}  // namespace rigrecon
