#pragma once

#include <cstdint>
#include <random>

namespace evergreen {

/// SplitMix64 finalizer. A user seed expands into independent substreams as
/// derive_seed(seed, counter), used for k-means restarts and per-item draws.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) noexcept {
    return splitmix64(splitmix64(seed) ^ (counter * 0xd1b54a32d192ed03ULL + 1));
}

/// Uniform double in [0, 1) from the top 53 bits of one draw. Unlike the
/// std distributions this is identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace evergreen
