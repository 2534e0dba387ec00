#pragma once

#include <cstdint>
#include <random>

namespace gisst {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream). Streams keep structure, features, masks
/// and parameter initialisation decoupled so changing one never shifts another.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

}  // namespace gisst
