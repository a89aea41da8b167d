#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cale::rng {

using Engine = std::mt19937_64;

// Stable 64-bit FNV-1a; used to derive named sub-streams.
std::uint64_t fnv1a(std::string_view bytes) noexcept;

// SplitMix64 finalizer.
std::uint64_t mix(std::uint64_t x) noexcept;

// Engine for the sub-stream `name` of the root `seed`. Two different names
// give statistically independent streams; the same (seed, name) always gives
// the same stream on every platform.
Engine substream(std::uint64_t seed, std::string_view name);

// Uniform integer in [0, n). Unlike std::uniform_int_distribution the
// result sequence is identical across standard library implementations.
std::uint64_t uniform_index(Engine& gen, std::uint64_t n);

// Uniform double in [0, 1) with 53 random bits.
double uniform_unit(Engine& gen);

// Standard normal draw (Box-Muller, no cached second value).
double normal(Engine& gen);

// In-place Fisher-Yates shuffle built on uniform_index.
template <class RandomIt>
void shuffle(RandomIt first, RandomIt last, Engine& gen) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(gen, i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace cale::rng
