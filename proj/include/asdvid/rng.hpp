#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace asdvid {

// Seed derivation for independent, reproducible RNG streams. Every random
// decision in the pipeline draws from an engine derived here from the run
// seed plus a label for the decision site, so results never depend on
// iteration order or ambient global state.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view site) {
  return mix(base, hash_str(site));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view site,
                                 std::uint64_t n) {
  return mix(derive_seed(base, site), n);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view site,
                                 std::string_view key, std::uint64_t n) {
  return mix(mix(derive_seed(base, site), hash_str(key)), n);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace asdvid
