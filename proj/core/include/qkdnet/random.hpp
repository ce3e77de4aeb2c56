#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qkdnet {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer, used to derive independent seeds from one run seed.
constexpr std::uint64_t mixSeed(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hashName(std::string_view name) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Named sub-stream of a run seed. Streams with different names never share
/// state, so toggling one feature does not shift the draws of another.
inline Rng makeStream(std::uint64_t runSeed, std::string_view name)
{
    return Rng(mixSeed(runSeed ^ hashName(name)));
}

} // namespace qkdnet
