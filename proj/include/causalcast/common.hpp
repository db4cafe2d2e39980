#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace causalcast {

/// Error with a stable machine-parseable category, e.g. "ShapeMismatch",
/// "MissingLocation", "SeparationError". The CLI prints
/// `error: <category>: <message>` and exits 1.
class PipelineError : public std::runtime_error {
public:
    PipelineError(std::string category, const std::string& message)
        : std::runtime_error("error: " + category + ": " + message),
          category_(std::move(category)) {}

    const std::string& category() const { return category_; }

private:
    std::string category_;
};

[[noreturn]] inline void fail(std::string category, const std::string& message) {
    throw PipelineError(std::move(category), message);
}

/// Deterministic RNG used everywhere a seed is taken. Distributions are
/// implemented by hand so identical seeds give identical streams regardless
/// of the standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) {
        // rejection sampling to avoid modulo bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (no cached spare; call-count stable).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    /// Poisson by inversion for small means, normal approximation above 50.
    uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean > 50.0) {
            const double x = normal(mean, std::sqrt(mean));
            return x <= 0.0 ? 0 : static_cast<uint64_t>(x + 0.5);
        }
        const double limit = std::exp(-mean);
        uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace causalcast
