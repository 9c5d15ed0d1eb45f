#pragma once

#include <cstdint>

#include "specx/tensor.hpp"

namespace specx {

// splitmix64: tiny, seedable, bit-reproducible across platforms.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; avoids stdlib distribution implementation differences.
    double normal();

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  private:
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stable 64-bit mix of (seed, a, b); used for per-image seeds and split hashing.
std::uint64_t hash_mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Kaiming-uniform fan-in fill: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
void kaiming_uniform_fill(Tensor& t, std::size_t fan_in, Rng& rng);

}  // namespace specx
