// Deterministic, portable pseudo-random generation.
//
// All randomness in this project flows through xoshiro256++ seeded via
// splitmix64, so the same seed reproduces bit-identical streams on any
// platform with IEEE-754 doubles. Gaussian-shaped noise uses an
// Irwin-Hall sum (12 uniforms minus 6) instead of Box-Muller: it needs
// no libm transcendentals, which keeps the stream portable across libm
// implementations. Good enough for simulation noise; not a statistics
// library.
#pragma once

#include <cstdint>

namespace motkit {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    // Derives an independent stream, e.g. one per frame or per epoch.
    Rng fork(std::uint64_t stream_id) const {
        std::uint64_t mix = s_[0] ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
        return Rng(mix);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n), n >= 1. Modulo bias is negligible for desk-scale n.
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    // Approximately standard normal (Irwin-Hall, support [-6, 6]).
    double gauss() {
        double acc = 0.0;
        for (int i = 0; i < 12; ++i) acc += uniform();
        return acc - 6.0;
    }

    double gauss(double mean, double sigma) { return mean + sigma * gauss(); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4] = {};
};

} // namespace motkit
