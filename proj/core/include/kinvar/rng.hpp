#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "kinvar/math.hpp"

namespace kinvar {

// splitmix64 mixing step; used to derive well-separated seeds
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d4a2ca9da2a93dULL;
    return z ^ (z >> 31);
}

// Deterministic random stream.  The engine is mt19937_64 (sequence fixed by
// the standard); every distribution on top is hand-rolled so results are
// bit-identical across platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        eng_.seed(splitmix64(s));
    }

    // independent child stream; (seed, key) -> stream is a pure function
    Rng substream(std::uint64_t key) const {
        std::uint64_t s = seed_ ^ (0x9e3779b97f4a7c15ULL * (key + 0x632be59bd9b4e019ULL));
        return Rng(splitmix64(s));
    }

    // uniform on [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (caches the second draw)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // exponential with the given mean
    double exponential(double mean) {
        return -mean * std::log(1.0 - uniform());
    }

    // Rayleigh with scale sigma (radial magnitude of an isotropic 2-D gaussian)
    double rayleigh(double sigma) {
        return sigma * std::sqrt(-2.0 * std::log(1.0 - uniform()));
    }

    // |Cauchy| with scale sigma
    double half_cauchy(double sigma) {
        // inverse CDF of the half-Cauchy: sigma * tan(pi*u/2)
        double u = uniform();
        if (u >= 1.0) u = std::nextafter(1.0, 0.0);
        return sigma * std::tan(0.5 * kPi * u);
    }

    // half-normal with scale sigma
    double half_normal(double sigma) { return sigma * std::abs(normal()); }

    // integer in [0, n)
    std::uint64_t integer(std::uint64_t n) {
        // rejection-free modulo is fine for our n << 2^64 use
        return eng_() % n;
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    double spare_ = 0;
    bool have_spare_ = false;
};

} // namespace kinvar
