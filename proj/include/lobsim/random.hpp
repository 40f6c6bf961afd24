#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lobsim {

/// The one engine used everywhere. mt19937_64 output is fixed by the standard,
/// and the helpers below avoid the implementation-defined std distributions,
/// so a seed reproduces the same stream on every toolchain.
using Rng = std::mt19937_64;

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1].
inline double uniform_open0(Rng& rng) { return 1.0 - uniform01(rng); }

inline double exponential(Rng& rng, double rate) { return -std::log(uniform_open0(rng)) / rate; }

/// Standard normal by Box-Muller (one draw per call, the partner is discarded).
inline double standard_normal(Rng& rng) {
    const double u1 = uniform_open0(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace lobsim
