#pragma once

#include <cstdint>
#include <random>

namespace focuslab {

/// Random stream keyed by (seed, ordinal). std::mt19937_64 and std::seed_seq
/// are fully specified by the standard, and the conversions below avoid the
/// implementation-defined std distributions, so streams are identical across
/// platforms.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t ordinal) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(ordinal), static_cast<std::uint32_t>(ordinal >> 32)};
    return std::mt19937_64(seq);
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform in (0, 1).
inline double uniform_open01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform integer in [0, n), rejection sampled.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

} // namespace focuslab
