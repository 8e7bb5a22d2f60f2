#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rigsplat {

// Deterministic random stream. std::mt19937_64 is bit-exact across
// platforms; the uniform/normal draws below avoid std distributions,
// whose outputs are implementation-defined.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : engine_(seed) {}

    // Derives an independent substream from (seed, a, b, c), used so
    // per-(iteration, view) draws do not depend on call order.
    static RngStream substream(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
        uint64_t s = seed;
        s = mix(s ^ mix(a + 0x9e3779b97f4a7c15ull));
        s = mix(s ^ mix(b + 0xbf58476d1ce4e5b9ull));
        s = mix(s ^ mix(c + 0x94d049bb133111ebull));
        return RngStream(s);
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        // Rejection sampling keeps the draw unbiased.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller; pairs are cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace rigsplat
