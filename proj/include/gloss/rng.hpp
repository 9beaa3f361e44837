#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gloss/matrix.hpp"

namespace gloss {

// =============================================================================
// Deterministic RNG. The engine is std::mt19937_64 (its output sequence is
// pinned by the standard); the distributions are hand-rolled because the
// standard library's are implementation-defined and would break bit-level
// reproducibility across toolchains.
// =============================================================================

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Mixes a base seed with stream tags so that independent consumers
// (epoch loops, batch splits, sweep points) get decorrelated streams.
inline uint64_t mix_seed(uint64_t seed, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
    uint64_t x = splitmix64(seed);
    x = splitmix64(x ^ splitmix64(a + 0x1000003));
    x = splitmix64(x ^ splitmix64(b + 0x2000005));
    x = splitmix64(x ^ splitmix64(c + 0x3000007));
    return x;
}

class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). Modulo bias is irrelevant at these ranges
    // and the mapping stays reproducible.
    int uniform_int(int n) {
        return static_cast<int>(engine_() % static_cast<uint64_t>(n));
    }

    // Box-Muller with a cached spare.
    double normal() {
        if (have_spare_) { have_spare_ = false; return spare_; }
        double u1 = uniform01(), u2 = uniform01();
        while (u1 <= 1e-300) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

    Matrix uniform_matrix(int r, int c, double lo, double hi) {
        Matrix m(r, c);
        for (double& v : m.raw()) v = uniform(lo, hi);
        return m;
    }

    Matrix normal_matrix(int r, int c, double mean = 0.0, double stddev = 1.0) {
        Matrix m(r, c);
        for (double& v : m.raw()) v = mean + stddev * normal();
        return m;
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace gloss
