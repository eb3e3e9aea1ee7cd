#pragma once

#include <cstdint>

namespace pego {

using Seed = std::uint64_t;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent child seed for (stream, index) under a base seed. Every
/// randomized component derives its generator seed through this so that
/// parallel work never shares a random stream.
constexpr Seed derive_seed(Seed base, std::uint64_t stream, std::uint64_t index = 0) noexcept {
    return splitmix64(splitmix64(splitmix64(base) ^ stream) ^ (index * 0xD1B54A32D192ED03ULL));
}

// Stream tags.
inline constexpr std::uint64_t kStreamDesign = 0x6c6873;      // "lhs"
inline constexpr std::uint64_t kStreamIteration = 0x697472;   // "itr"
inline constexpr std::uint64_t kStreamForest = 0x666f72;      // "for"
inline constexpr std::uint64_t kStreamTemperature = 0x746d70; // "tmp"
inline constexpr std::uint64_t kStreamMies = 0x6d6965;        // "mie"
inline constexpr std::uint64_t kStreamPerturb = 0x707274;     // "prt"
inline constexpr std::uint64_t kStreamNoise = 0x6e6f69;       // "noi"
inline constexpr std::uint64_t kStreamTree = 0x747265;        // "tre"
inline constexpr std::uint64_t kStreamRandomSearch = 0x727373; // "rss"

} // namespace pego
