#pragma once

// Counter-based pseudo-random stream used for every synthetic fixture.
//
// The scheme is fixed so that other implementations can reproduce the same
// numbers bit for bit:
//
//   mix(z)      : z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//                 z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
//                 (the SplitMix64 finalizer, all arithmetic mod 2^64)
//   u64(s, k)   = mix(s + (k + 1) * 0x9E3779B97F4A7C15)   for counter k = 0, 1, ...
//   uniform     = (u64 >> 11) * 2^-53                      in [0, 1)
//   normal      : draws a = uniform, b = uniform (two consecutive counters),
//                 returns sqrt(-2 ln(1 - a)) * cos(2 pi b)   (Box-Muller, cosine branch)
//
// Independent sub-streams are derived with derive_seed(seed, tag) =
// mix(seed ^ mix(tag + 0x9E3779B97F4A7C15)).

#include <cmath>
#include <cstdint>
#include <numbers>

namespace daa {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64_mix(seed ^ splitmix64_mix(tag + 0x9E3779B97F4A7C15ULL));
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    std::uint64_t next_u64() {
        const std::uint64_t k = counter_++;
        return splitmix64_mix(seed_ + (k + 1) * 0x9E3779B97F4A7C15ULL);
    }

    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        const double a = uniform();
        const double b = uniform();
        return std::sqrt(-2.0 * std::log(1.0 - a)) * std::cos(2.0 * std::numbers::pi * b);
    }

    /// Uniform integer in [0, bound). Uses a plain modulo; the bias is
    /// negligible for the small bounds used by the fixtures.
    std::uint64_t below(std::uint64_t bound) { return next_u64() % bound; }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

} // namespace daa
