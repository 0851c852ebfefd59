#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fullmatch {

using Rng = std::mt19937_64;

/// Independent generator for a named purpose ("data", "init", "augment", ...)
/// derived from one experiment seed, so consuming one stream never shifts another.
inline Rng make_stream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char ch : name) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  // splitmix64 finalizer over seed ^ name hash
  std::uint64_t z = seed ^ h;
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return Rng(z);
}

}  // namespace fullmatch
