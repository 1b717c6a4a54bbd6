// random.hpp - seeded, order-independent random streams.
#pragma once

#include <cstdint>
#include <random>

namespace vacscan {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Engine for stream `index` under `seed`. The same (seed, index) pair always
/// yields the same sequence, independent of which other streams were drawn.
inline std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed)), static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                      static_cast<std::uint32_t>(splitmix64(seed ^ splitmix64(index + 1))),
                      static_cast<std::uint32_t>(splitmix64(seed ^ splitmix64(index + 1)) >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace vacscan
