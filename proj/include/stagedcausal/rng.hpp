#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace stagedcausal {

/// splitmix64 step; used to derive independent per-task seeds from a base
/// seed so parallel and sequential execution see identical streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform double in [0,1) with 53 random bits, independent of the standard
/// library's distribution implementations.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double exponential1(std::mt19937_64& rng) {
    return -std::log1p(-uniform01(rng));
}

/// Index in [0, n) with uniform probability (rejection sampling).
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

/// Draws a level from a probability vector by inverse CDF.
inline int categorical(std::mt19937_64& rng, std::span<const double> probs) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
        acc += probs[k];
        if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace stagedcausal
