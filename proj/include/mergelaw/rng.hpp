#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace mergelaw::rng {

// SplitMix64 finalizer. Used both as a hash mixer and as a counter-based
// generator: mix(key + i * golden) gives an independent stream per index.
constexpr std::uint64_t mix(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t combine(std::uint64_t a, std::uint64_t b) noexcept {
  return mix(a ^ (mix(b) + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
}

constexpr std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (auto p : parts) h = combine(h, p);
  return h;
}

// Uniform double in [0, 1) for element `index` of stream `key`.
constexpr double uniform_at(std::uint64_t key, std::uint64_t index) noexcept {
  return static_cast<double>(mix(key + index * 0xD1B54A32D192ED03ULL) >> 11) * 0x1.0p-53;
}

}  // namespace mergelaw::rng
