#pragma once

#include <cmath>
#include <cstdint>

namespace tierlearn {

// splitmix64, used both as a stream mixer and as the core generator.
inline uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic generator with hand-rolled distributions. The standard
// library distributions are not bit-stable across implementations, and
// several contracts here (trace generation, replay sampling, exploration)
// promise byte-identical reruns, so everything goes through this.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    // Derives an independent stream; gives each consumer (net init,
    // exploration, replay sampling, trace synthesis) its own sequence.
    // Stream ids are arbitrary 64-bit tags, hashed rather than iterated.
    static Rng stream(uint64_t seed, uint64_t stream_id) {
        uint64_t a = seed;
        uint64_t b = stream_id ^ 0xa02bdbf7bb3c0a7ULL;
        return Rng(splitmix64(a) ^ splitmix64(b));
    }

    uint64_t next() { return splitmix64(state_); }

    // Uniform in [0, n). Multiply-shift; bias is negligible at the ranges
    // used here (all far below 2^32).
    uint64_t below(uint64_t n) {
        return (uint64_t)(((__uint128_t)next() * n) >> 64);
    }

    // Uniform in [0, 1).
    double uniform() { return (next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Knuth's product method. Cost is O(mean) uniforms per draw, fine for
    // the request-size means used here (< 100).
    uint32_t poisson(double mean) {
        const double limit = std::exp(-mean);
        uint32_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

}  // namespace tierlearn
