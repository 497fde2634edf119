#pragma once

// Portable pseudo-random helpers.
//
// std::mt19937_64 has a fully specified output sequence, but the standard
// distributions (uniform_int_distribution, shuffle, ...) are implementation
// defined. Everything drawn from the engine goes through the helpers below so
// that a seed reproduces the same trials on every platform.

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace srosr {

using Engine = std::mt19937_64;

// SplitMix64 finalizer, used to derive independent child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(parent) ^ (stream * 0xD1B54A32D192ED03ULL + 1));
}

// Uniform integer in [0, bound) by rejection; bound must be > 0.
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
  const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % bound);
  std::uint64_t draw;
  do {
    draw = eng();
  } while (draw >= limit);
  return draw % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Fisher-Yates, last element first.
template <typename T>
void shuffle(std::span<T> items, Engine& eng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(eng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace srosr
