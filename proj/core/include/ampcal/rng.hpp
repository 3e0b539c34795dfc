#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include "ampcal/stats.hpp"

namespace ampcal {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Child seed for a named task, e.g. derive_seed(master, "fit", sample_id)
// or derive_seed(master, "impute", {gene, rep}). Every random stream in the
// library is obtained this way so results never depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    return splitmix64(master ^ fnv1a64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::initializer_list<std::uint64_t> indices) {
    std::uint64_t s = derive_seed(master, tag);
    for (std::uint64_t i : indices) s = splitmix64(s ^ splitmix64(i + 0x632be59bd9b4e019ull));
    return s;
}

// Uniform draw on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
    double u;
    do {
        u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    } while (u <= 0.0);
    return u;
}

// Standard normal via the inverse CDF; unlike std::normal_distribution the
// stream is identical across standard-library implementations.
inline double standard_normal(Rng& rng) { return normal_quantile(uniform_open(rng)); }

}  // namespace ampcal
