#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace geocsi {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Named sub-seed of a root seed, so each consumer's stream is independent of
/// how many numbers the others draw.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
    return splitmix64(splitmix64(root ^ fnv1a64(name)) + index);
}

}  // namespace geocsi
