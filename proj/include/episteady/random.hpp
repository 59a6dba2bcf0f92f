#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace episteady {

/// Deterministic random stream keyed by (seed, stream).
///
/// Engine: std::mt19937_64 seeded through std::seed_seq with the four 32-bit words
/// (seed lo, seed hi, stream lo, stream hi). Both algorithms are fixed by the C++
/// standard, so draws are identical on every conforming platform. Doubles take the
/// top 53 bits of one engine output.
class Rng {
  public:
    Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(make_engine(seed, stream)) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do x = engine_();
        while (x >= limit);
        return x % n;
    }

    /// Index drawn from nonnegative weights summing to 1 (the last positive index absorbs round-off).
    std::size_t categorical(std::span<const double> weights) {
        const double u = uniform();
        double acc = 0.0;
        std::size_t last = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            acc += weights[i];
            last = i;
            if (u < acc) return i;
        }
        return last;
    }

  private:
    static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        return std::mt19937_64(seq);
    }

    std::mt19937_64 engine_;
};

} // namespace episteady
