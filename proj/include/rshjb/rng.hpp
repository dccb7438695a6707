#pragma once

#include <cstdint>
#include <random>

namespace rshjb {

/// Stream tags keeping chain clocks and diffusion noise independent, so the
/// same chain path can be replayed under every policy.
inline constexpr std::uint64_t kChainStream = 0x636861696e733031ULL;
inline constexpr std::uint64_t kNoiseStream = 0x6e6f697365303172ULL;

namespace detail {

// splitmix64 finalizer; good avalanche, cheap to derive per-path seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Deterministic per-(seed, path, stream) generator; scheduling-independent
/// by construction since no state is shared across paths.
inline std::mt19937_64 make_path_rng(std::uint64_t master_seed, std::uint64_t path_index,
                                     std::uint64_t stream_tag) {
    std::uint64_t s = detail::mix64(master_seed);
    s = detail::mix64(s ^ detail::mix64(path_index + 1));
    s = detail::mix64(s ^ stream_tag);
    return std::mt19937_64(s);
}

}  // namespace rshjb
