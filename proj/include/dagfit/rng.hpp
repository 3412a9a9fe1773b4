#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dagfit {

/// Deterministic splitmix64-based generator with Poisson and Gaussian draws
/// implemented in-library so output streams depend only on the seed, not on
/// the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Independent substream: depends only on (seed, k).
    Rng(std::uint64_t seed, std::uint64_t k) : state_(mix(seed) ^ mix(k * 0x9e3779b97f4a7c15ULL + 1)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform in [0, 1).
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal (Box-Muller; one value per call, cache unused).
    double gauss() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Poisson draw by Knuth's product method, splitting large means so the
    /// exponential never underflows. O(mean) per draw; fine at spectrum scale.
    std::int64_t poisson(double mean) {
        std::int64_t total = 0;
        while (mean > 500.0) {
            total += poisson_small(250.0);
            mean -= 250.0;
        }
        return total + poisson_small(mean);
    }

private:
    std::int64_t poisson_small(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        std::int64_t k = -1;
        double prod = 1.0;
        do {
            ++k;
            prod *= uniform();
        } while (prod > limit);
        return k;
    }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace dagfit
