#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rblu {

/// Seedable generator. Identical seed and identical call sequence give
/// identical draws; `split` derives independent child streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
        engine_.seed(seq);
    }

    /// Child stream keyed on (parent seed, stream id). Does not advance the parent.
    Rng split(std::uint64_t stream) const {
        Rng child;
        child.seed_ = seed_ ^ (stream * 0x9E3779B97F4A7C15ULL);
        std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5bd1e995U};
        child.engine_.seed(seq);
        return child;
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        for (;;) {
            const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
            if (u > 0.0) return u;
        }
    }

    double normal() { return normal_(engine_); }

    /// Gamma(shape, 1).
    double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

    double exponential() { return -std::log(uniform()); }

    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_ = 0;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

}  // namespace rblu
