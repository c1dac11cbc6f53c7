#pragma once

// Counter-based keyed random numbers.
//
// Every draw is a pure function of (seed, frame, index, stream): the value a point
// receives never depends on iteration order or on how many other draws were made.
//
//   mix(z)   = splitmix64 finalizer
//   key      = mix(mix(mix(mix(seed) ^ mix(frame + K1)) ^ mix(index + K2)) ^ mix(stream + K3))
//   uniform  = ((key >> 11) + 0.5) * 2^-53          in the open interval (0, 1)

#include <cmath>
#include <cstdint>

#include "past/geometry.hpp"

namespace past::rng {

inline constexpr std::uint64_t kFrameSalt = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kIndexSalt = 0xD1B54A32D192ED03ULL;
inline constexpr std::uint64_t kStreamSalt = 0xCA5A826395121157ULL;

constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t frame, std::uint64_t index,
                            std::uint64_t stream) {
    std::uint64_t h = mix(seed);
    h = mix(h ^ mix(frame + kFrameSalt));
    h = mix(h ^ mix(index + kIndexSalt));
    return mix(h ^ mix(stream + kStreamSalt));
}

inline double uniform(std::uint64_t seed, std::uint64_t frame, std::uint64_t index,
                      std::uint64_t stream) {
    return (static_cast<double>(key(seed, frame, index, stream) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on streams (stream, stream + 1).
inline double normal(std::uint64_t seed, std::uint64_t frame, std::uint64_t index,
                     std::uint64_t stream) {
    const double u1 = uniform(seed, frame, index, stream);
    const double u2 = uniform(seed, frame, index, stream + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

/// Derives an independent 64-bit seed (scene seeds from a master seed, etc).
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    return key(seed, salt, 0, 0);
}

}  // namespace past::rng
