#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tsmi {

// splitmix64, used to derive independent stream seeds from (seed, index)
// pairs so per-window streams stay reproducible under any scheduling.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
    // 53-bit mantissa draw, identical across platforms.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double normal(Rng& rng) {
    // Box-Muller on explicit uniforms; std::normal_distribution is not
    // bit-stable across standard library implementations.
    double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    if (u1 <= 0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586477 * u2);
}

}  // namespace tsmi
