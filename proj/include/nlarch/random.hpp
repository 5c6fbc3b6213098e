#pragma once

#include <cstdint>
#include <random>

namespace nlarch {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream index); used for per-point and
/// per-replication generators.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    return Rng(seq);
}

/// Uniform on the open interval (0, 1) with 53 random bits.
template <class URBG>
double open_uniform(URBG& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace nlarch
