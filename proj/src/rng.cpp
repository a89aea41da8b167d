#include "cale/rng.hpp"

#include <cmath>
#include <numbers>

namespace cale::rng {

std::uint64_t fnv1a(std::string_view bytes) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t mix(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Engine substream(std::uint64_t seed, std::string_view name) {
  return Engine{mix(mix(seed) ^ fnv1a(name))};
}

std::uint64_t uniform_index(Engine& gen, std::uint64_t n) {
  // Values below 2^64 mod n are rejected so the accepted range is a whole
  // number of copies of [0, n).
  const std::uint64_t threshold = (0 - n) % n;
  std::uint64_t x = gen();
  while (x < threshold) x = gen();
  return x % n;
}

double uniform_unit(Engine& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

double normal(Engine& gen) {
  double u1 = uniform_unit(gen);
  while (u1 <= 0.0) u1 = uniform_unit(gen);
  const double u2 = uniform_unit(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace cale::rng
