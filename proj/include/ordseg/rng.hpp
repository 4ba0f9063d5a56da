// Counter-based random streams. Every draw is a pure function of (seed, counter),
// so results are bit-reproducible across runs and platforms.
#ifndef ORDSEG_RNG_HPP
#define ORDSEG_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ordseg {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Combines values into one 64-bit key (order sensitive).
constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
    return mix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

/// SplitMix64 evaluated at an explicit position: draw k is
/// mix64(seed + (k + 1) * golden_gamma). Normals use Box-Muller on consecutive
/// uniform pairs, caching nothing: normal(j) only depends on uniforms 2j, 2j+1.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

    constexpr std::uint64_t seed() const noexcept { return seed_; }

    constexpr std::uint64_t bits_at(std::uint64_t counter) const noexcept {
        return mix64(seed_ + (counter + 1) * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform in (0, 1].
    double uniform_at(std::uint64_t counter) const noexcept {
        return static_cast<double>((bits_at(counter) >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal number j of the stream.
    double normal_at(std::uint64_t j) const noexcept {
        const std::uint64_t pair = j / 2;
        const double u1 = uniform_at(2 * pair);
        const double u2 = uniform_at(2 * pair + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return (j % 2 == 0) ? r * std::cos(angle) : r * std::sin(angle);
    }

    // Sequential interface.
    std::uint64_t next_bits() noexcept { return bits_at(counter_++); }
    double next_uniform() noexcept { return uniform_at(counter_++); }

    /// Uniform integer in [0, bound) by rejection (unbiased).
    std::uint64_t next_below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - (~std::uint64_t{0} % bound));
        for (;;) {
            const std::uint64_t x = next_bits();
            if (bound == 0) return 0;
            if (x < limit) return x % bound;
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace ordseg

#endif  // ORDSEG_RNG_HPP
