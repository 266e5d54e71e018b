#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "ssmgd/errors.hpp"

namespace ssmgd {

/// splitmix64 finalizer; the standard 64-bit avalanche mix.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based seed derivation: trial i of a run with base seed b gets
/// an independent stream seed that never collides across i at fixed b.
inline std::uint64_t mix_seed(std::uint64_t base_seed, std::uint64_t index) {
    return splitmix64(base_seed + 0x9e3779b97f4a7c15ULL * (index + 1));
}

/// mt19937_64 is bit-exact across standard libraries; the distributions
/// below are hand-rolled so sampled values are equally reproducible.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller (no cached spare, stays stateless).
inline double gaussian(Rng& gen) {
    double u1 = uniform01(gen);
    while (u1 <= 0.0) u1 = uniform01(gen);
    const double u2 = uniform01(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

/// Inverse-CDF draw from a cumulative row; cdf must be nondecreasing with
/// cdf.back() == 1 (within rounding). Returns an index in [0, cdf.size()).
inline std::size_t sample_cdf(std::span<const double> cdf, double u) {
    std::size_t lo = 0, hi = cdf.size();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (u < cdf[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo < cdf.size() ? lo : cdf.size() - 1;
}

} // namespace ssmgd
