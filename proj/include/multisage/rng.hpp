#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace multisage {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Derives a child seed from a parent seed and a path of integers.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path);

// The helpers below consume raw 64-bit words so results do not depend on the
// standard library's distribution implementations.

/// Uniform integer in [0, n). n must be positive.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Uniform real in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Uniform real in [lo, hi).
double uniform_real(Rng& rng, double lo, double hi);

/// Bernoulli(p).
bool bernoulli(Rng& rng, double p);

/// Fisher-Yates shuffle driven by uniform_index.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
  auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    auto j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace multisage
