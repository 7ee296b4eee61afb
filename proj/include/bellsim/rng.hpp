#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bellsim {

/// Recorded in every report so runs can be reproduced.
inline constexpr std::string_view kRngAlgorithm =
    "mt19937_64; stream i seeded with splitmix64(master + (i + 1) * 0x9e3779b97f4a7c15)";

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the i-th independent stream derived from a master seed.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream)
{
    return splitmix64(master + (stream + 1) * 0x9e3779b97f4a7c15ULL);
}

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace bellsim
