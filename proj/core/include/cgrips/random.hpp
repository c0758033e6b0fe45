#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace cgrips {

// All seeded randomness in the project goes through std::mt19937_64, whose
// output sequence is fixed by the C++ standard. The standard distributions are
// implementation-defined, so bounded draws and shuffles are done here instead
// to keep splits and perturbations identical across toolchains.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

// Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % bound;
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Fisher-Yates, iterating from the back.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

}  // namespace cgrips
