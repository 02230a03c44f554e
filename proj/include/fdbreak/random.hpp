#pragma once

#include <cstdint>
#include <random>

namespace fdbreak {

using Engine = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based seed derivation: the seed of stream `stream`, item `index`
// depends only on (master, stream, index), never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
    return mix64(mix64(mix64(master) ^ (stream * 0xd1b54a32d192ed03ULL)) ^ index);
}

// Stream tags, kept distinct so that independent consumers never share draws.
namespace streams {
inline constexpr std::uint64_t null_law = 1;
inline constexpr std::uint64_t lambda_paths = 2;
inline constexpr std::uint64_t bootstrap = 3;
inline constexpr std::uint64_t dgp_scores = 4;
inline constexpr std::uint64_t dgp_mixture = 5;
inline constexpr std::uint64_t replicate = 6;
}  // namespace streams

}  // namespace fdbreak
