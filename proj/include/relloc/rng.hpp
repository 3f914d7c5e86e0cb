#pragma once
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include "relloc/geometry.hpp"

// Counter-free splittable RNG: substreams are derived by hashing
// (seed, id, id, ...) through splitmix64, so any trial/purpose combination
// yields a reproducible stream independent of scheduling.

namespace relloc {

inline uint64_t splitmix64_step(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    static Rng substream(uint64_t seed, std::initializer_list<uint64_t> ids) {
        uint64_t s = seed;
        for (uint64_t id : ids) {
            s ^= splitmix64_step(s) + id;
            splitmix64_step(s);
        }
        return Rng(s);
    }

    uint64_t next_u64() { return splitmix64_step(state_); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; deterministic across standard libraries unlike
    // std::normal_distribution.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    Vec3 unit_sphere() {
        const double z = uniform(-1.0, 1.0);
        const double phi = uniform(0.0, 2.0 * M_PI);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

private:
    uint64_t state_;
    double spare_ = 0;
    bool have_spare_ = false;
};

} // namespace relloc
