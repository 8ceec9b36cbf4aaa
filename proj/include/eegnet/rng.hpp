#pragma once

// Deterministic randomness. std::mt19937_64 output is pinned by the standard,
// so streams are bit-identical across platforms; the std::*_distribution
// classes are not, which is why the draw helpers here are hand rolled.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

#include "eegnet/error.hpp"

namespace eegnet {

// splitmix64 finalizer. Good avalanche, cheap, stable.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// A seeded random stream plus cheap derivation of independent child streams.
// derive() depends only on the parent's seed and the label, never on how much
// the parent has been consumed, so call sites can split streams freely without
// perturbing each other.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  RngStream derive(std::string_view label) const {
    return RngStream(mix64(seed_ ^ fnv1a64(label)));
  }

  RngStream derive(std::uint64_t index) const {
    return RngStream(mix64(seed_ + 0x9e3779b97f4a7c15ull * (index + 1)));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw ValueError("uniform: lo > hi");
    return lo + (hi - lo) * uniform01();
  }

  // Standard normal via Box-Muller. No spare is cached so consumption stays
  // a fixed two words per draw.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::int64_t uniform_int(std::int64_t n) {
    if (n <= 0) throw ValueError("uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = ~0ull - (~0ull % un + 1ull) % un;
    std::uint64_t r = next_u64();
    while (r > limit) r = next_u64();
    return static_cast<std::int64_t>(r % un);
  }

  // In-place Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<std::size_t>(i)],
                v[static_cast<std::size_t>(uniform_int(i + 1))]);
    }
  }

  // k distinct values from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::int64_t> sample_without_replacement(std::int64_t n,
                                                       std::int64_t k) {
    if (k < 0 || k > n) throw ValueError("sample_without_replacement: k > n");
    std::vector<std::int64_t> pool(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(k));
    for (std::int64_t i = 0; i < k; ++i) {
      const std::int64_t j = i + uniform_int(n - i);
      std::swap(pool[static_cast<std::size_t>(i)],
                pool[static_cast<std::size_t>(j)]);
      out.push_back(pool[static_cast<std::size_t>(i)]);
    }
    return out;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace eegnet
