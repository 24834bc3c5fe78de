#pragma once

#include <cstdint>
#include <random>

#include "nvsm/errors.hpp"

namespace nvsm {

// All stochastic components draw through these helpers instead of
// std::uniform_*_distribution, whose output sequences are not pinned by the
// standard. Keeping the mapping from raw engine output to draws in-repo is
// what makes seeds portable across toolchains.

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Engine for a (seed, stream) pair; streams are independent for distinct
// indices, so e.g. batch b is a pure function of (store, seed, b).
inline Rng rng_for_stream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(splitmix64(seed) ^ stream));
}

// Unbiased draw from [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) throw UsageError("uniform_index: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

}  // namespace nvsm
