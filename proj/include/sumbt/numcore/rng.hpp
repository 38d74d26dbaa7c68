#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace sumbt::numcore {

// Seeded random source with hand-rolled distributions. The standard
// distribution classes are implementation-defined, so corpora and weight
// initializations generated through them would not be reproducible across
// standard libraries; everything here is pinned to the mt19937_64 bit stream.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n); n > 0. Modulo bias is irrelevant at the n used here.
    int uniform_int(int n) {
        return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, one fresh pair per call (no cached spare).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    // Independent substream, e.g. one per seed or per pipeline stage.
    Rng fork(std::uint64_t stream) {
        std::uint64_t x = next_u64() ^ (stream * 0x9E3779B97F4A7C15ull);
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ull;
        x ^= x >> 27;
        return Rng(x);
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace sumbt::numcore
