#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace cate {

// Seeded random source with hand-rolled distributions. std:: distribution
// objects are implementation-defined, which would break the bit-identical
// regeneration contract across standard libraries; everything here is
// specified arithmetic on top of mt19937_64.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller; the second variate is cached.
    double normal(double mu, double sd) {
        if (has_spare_) {
            has_spare_ = false;
            return mu + sd * spare_;
        }
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return mu + sd * r * std::cos(a);
    }

    // Unbiased integer in [0, bound) via rejection sampling.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound; // 2^64 mod bound
        std::uint64_t v = next_u64();
        while (v < threshold) v = next_u64();
        return v % bound;
    }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace cate
