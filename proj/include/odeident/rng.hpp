#pragma once

#include <cstdint>
#include <random>

namespace odeident {

/// Generator for draw number `counter` of stream `stream` under `seed`.
///
/// Every random draw in the library goes through this, so results depend only
/// on (seed, stream, counter) and not on evaluation order.
inline std::mt19937_64 counter_rng(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace odeident
