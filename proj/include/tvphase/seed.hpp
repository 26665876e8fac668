#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tvphase {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/* Counter-based seed derivation: the seed of a unit of work depends only on the
 * master seed and the unit's coordinates, never on scheduling order. */
inline std::uint64_t derive_seed(std::uint64_t master,
    std::initializer_list<std::uint64_t> path)
{
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t c : path) { h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL)); }
    return h;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

} // namespace tvphase
