#pragma once

// Reproducible random streams: xoshiro256** seeded through splitmix64, with a
// Box–Muller Gaussian transform. The output sequence for a given seed is part
// of the contract (experiment trajectories depend on it) and must not change.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "lowrank/matrix.hpp"

namespace lowrank {

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_{seed} {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Standard normal. Box–Muller yields pairs; the second is cached.
    double normal() noexcept {
        if (cached_) {
            const double z = *cached_;
            cached_.reset();
            return z;
        }
        // 1 - uniform() lies in (0, 1], so the log is finite.
        const double radius = std::sqrt(-2.0 * std::log(1.0 - uniform()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        cached_ = radius * std::sin(angle);
        return radius * std::cos(angle);
    }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    static constexpr std::uint64_t splitmix64(std::uint64_t& x) noexcept {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
    std::optional<double> cached_;
};

// rows×cols matrix of i.i.d. Normal(0, stddev²) draws, filled row-major.
inline Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
    if (!(stddev > 0.0)) throw std::invalid_argument("gaussian: stddev must be positive");
    Matrix out(rows, cols);
    for (double& x : out.values()) x = stddev * rng.normal();
    return out;
}

inline Matrix uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    Matrix out(rows, cols);
    for (double& x : out.values()) x = rng.uniform(lo, hi);
    return out;
}

}  // namespace lowrank
